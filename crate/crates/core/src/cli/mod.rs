//! Command-line front end. Exit codes: 0 success, 1 usage or I/O error,
//! 2 numerical failure.

mod args;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use strain_tc::degrade::{add_noise, place_bad_frames, FrameQualityMask, NoiseSpec};
use strain_tc::eval::{
    compute_pre, format_table, results_to_csv, run_grid, timing_to_csv, GridRegion, GridSpec, Method, Region,
};
use strain_tc::fit::{cumulate, fit_exponential, fit_stack, ExpFit, LMConfig};
use strain_tc::io;
use strain_tc::phantom::{synth_cumulative, synth_incremental, tau_map, PhantomSpec, Sample};
use strain_tc::{Error, StackKind};

use args::{Cli, Command, DemoArgs, DegradeArgs, FitArgs, GridArgs, PhantomArgs, ReconstructArgs, SynthArgs};

pub const MANIFEST_NAME: &str = "manifest.txt";

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self { code: if e.is_numerical() { 2 } else { 1 }, message: e.to_string() }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

pub fn run(argv: Vec<String>) -> CliResult {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            print!("{e}");
            return Ok(());
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            return Err(Failure::usage(first.trim_start_matches("error: ").to_string()));
        }
    };

    let cli = match &cli.manifest {
        Some(path) => {
            if cli.command.is_some() {
                return Err(Failure::usage("--manifest cannot be combined with a subcommand"));
            }
            let argv = argv_from_manifest(path, cli.out_dir.as_deref())?;
            Cli::try_parse_from(&argv)
                .map_err(|e| Failure::usage(format!("manifest {}: {}", path.display(), e.kind())))?
        }
        None => cli,
    };

    let Some(command) = &cli.command else {
        return Err(Failure::usage("no subcommand given; see --help"));
    };
    let out_dir = cli
        .out_dir
        .clone()
        .ok_or_else(|| Failure::usage(format!("no output directory; pass --out-dir or set {}", args::OUT_DIR_ENV)))?;
    if !out_dir.is_dir() {
        return Err(Failure::usage(format!("output directory {} does not exist", out_dir.display())));
    }

    let resolved = match command {
        Command::Synth(a) => synth(a, &out_dir)?,
        Command::Degrade(a) => degrade(a, &out_dir)?,
        Command::Reconstruct(a) => reconstruct(a, &out_dir)?,
        Command::Fit(a) => fit(a, &out_dir)?,
        Command::Grid(a) => grid(a, &out_dir)?,
        Command::Demo(a) => demo(a, &out_dir)?,
    };
    write_manifest(&out_dir, command, &resolved)
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> CliResult {
    fs::write(path, bytes).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn write_manifest(out_dir: &Path, command: &Command, resolved: &[(String, String)]) -> CliResult {
    let mut text = String::from("# strain-tc run manifest\n");
    let _ = writeln!(text, "version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(text, "subcommand = {}", command.name());
    let _ = writeln!(text, "out_dir = {}", out_dir.display());
    for (k, v) in command.manifest_args() {
        let _ = writeln!(text, "arg.{k} = {v}");
    }
    for (k, v) in resolved {
        let _ = writeln!(text, "resolved.{k} = {v}");
    }
    write_file(&out_dir.join(MANIFEST_NAME), text)
}

fn argv_from_manifest(path: &Path, out_dir: Option<&Path>) -> CliResult<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let mut subcommand = None;
    let mut recorded_dir = None;
    let mut flags = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Failure::usage(format!("{}: malformed line {line:?}", path.display())));
        };
        let (k, v) = (k.trim(), v.trim());
        if k == "subcommand" {
            subcommand = Some(v.to_string());
        } else if k == "out_dir" {
            recorded_dir = Some(PathBuf::from(v));
        } else if let Some(flag) = k.strip_prefix("arg.") {
            flags.push(format!("--{flag}"));
            flags.push(v.to_string());
        }
    }
    let subcommand = subcommand.ok_or_else(|| Failure::usage(format!("{}: no subcommand", path.display())))?;
    let dir = out_dir.map(Path::to_path_buf).or(recorded_dir);
    let mut argv = vec!["strain-tc".to_string(), subcommand];
    argv.extend(flags);
    if let Some(dir) = dir {
        argv.push("--out-dir".into());
        argv.push(dir.display().to_string());
    }
    Ok(argv)
}

fn load_phantom(a: &PhantomArgs) -> CliResult<PhantomSpec> {
    let mut spec = match (&a.config, a.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
            PhantomSpec::from_config_str(&text)?
        }
        (None, Some(sample)) => PhantomSpec::preset(sample),
        (None, None) => PhantomSpec::preset(Sample::A),
    };
    if let Some(w) = a.width {
        spec.width_px = w;
    }
    if let Some(h) = a.height {
        spec.height_px = h;
    }
    spec.validate()?;
    Ok(spec)
}

fn phantom_resolved(spec: &PhantomSpec) -> Vec<(String, String)> {
    spec.to_config_string()
        .lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (format!("phantom.{k}"), v.to_string()))
        .collect()
}

fn lm_resolved(cfg: &LMConfig) -> Vec<(String, String)> {
    vec![
        ("lm.initial_damping".into(), cfg.initial_damping.to_string()),
        ("lm.damping_up".into(), cfg.damping_up.to_string()),
        ("lm.damping_down".into(), cfg.damping_down.to_string()),
        ("lm.tau_floor".into(), "sample_time/10".into()),
        ("lm.tau_ceiling".into(), "100*last_time".into()),
    ]
}

fn synth(a: &SynthArgs, out: &Path) -> CliResult<Vec<(String, String)>> {
    let spec = load_phantom(&a.phantom)?;
    io::write_stack(&out.join("incremental.stack"), &synth_incremental(&spec)?)?;
    io::write_stack(&out.join("cumulative.stack"), &synth_cumulative(&spec)?)?;
    io::write_map_files(out, "tau_truth", &tau_map(&spec)?, None)?;
    write_file(&out.join("phantom.cfg"), spec.to_config_string())?;
    Ok(phantom_resolved(&spec))
}

fn degrade(a: &DegradeArgs, out: &Path) -> CliResult<Vec<(String, String)>> {
    let stack = io::read_stack(&a.input)?;
    let noise = NoiseSpec {
        base_snr_db: a.noise.snr_db,
        bad_frame_snr_db: a.noise.bad_snr_db,
        good_frame_fraction: a.noise.good_fraction,
        rng_seed: a.noise.seed,
    };
    let mask = place_bad_frames(stack.n_frames(), &noise)?;
    let noisy = add_noise(&stack, &mask, &noise)?;
    io::write_stack(&out.join("degraded.stack"), &noisy)?;
    io::write_mask(&out.join("mask.csv"), &mask)?;
    Ok(vec![("good_frames".into(), mask.good_count().to_string())])
}

fn reconstruct(a: &ReconstructArgs, out: &Path) -> CliResult<Vec<(String, String)>> {
    let stack = io::read_stack(&a.input)?;
    if stack.kind() != StackKind::Incremental {
        return Err(Failure::usage("reconstruct expects an incremental stack"));
    }
    let mask = match (&a.mask, a.method) {
        (Some(path), _) => io::read_mask(path)?,
        (None, Method::Spline) => return Err(Failure::usage("--mask is required for the spline method")),
        (None, _) => FrameQualityMask::all_good(stack.n_frames(), f64::NAN),
    };
    if mask.len() != stack.n_frames() {
        return Err(Failure::usage(format!(
            "mask has {} frames but the stack has {}",
            mask.len(),
            stack.n_frames()
        )));
    }
    let denoised = a.method.apply(&stack, &mask, &a.kalman.spec())?;
    io::write_stack(&out.join(format!("{}.stack", a.method)), &denoised)?;
    io::write_stack(&out.join(format!("{}_cumulative.stack", a.method)), &cumulate(&denoised)?)?;
    Ok(Vec::new())
}

fn fit(a: &FitArgs, out: &Path) -> CliResult<Vec<(String, String)>> {
    let mut stack = io::read_stack(&a.input)?;
    if stack.kind() == StackKind::Incremental {
        stack = cumulate(&stack)?;
    }
    let mut resolved = lm_resolved(&a.lm.config());
    let phantom = if a.phantom.is_given() {
        let spec = load_phantom(&a.phantom)?;
        if spec.width_px != stack.width() || spec.height_px != stack.height() {
            return Err(Failure::usage(format!(
                "phantom is {}x{} but the stack is {}x{}",
                spec.width_px,
                spec.height_px,
                stack.width(),
                stack.height()
            )));
        }
        resolved.extend(phantom_resolved(&spec));
        Some(spec)
    } else {
        None
    };
    let truth = phantom.as_ref().map(tau_map).transpose()?;
    let tc = fit_stack(&stack, &a.lm.config(), truth.as_ref())?;
    io::write_map_files(out, "tc_map", &tc.tau_map, Some(&tc.converged_mask))?;
    write_file(&out.join("converged.csv"), io::map_to_csv(&tc.converged_mask.clone_map(u8::from)))?;
    resolved.push(("coverage".into(), tc.coverage().to_string()));

    if let Some(spec) = &phantom {
        let inclusion = spec.inclusion_mask();
        let mut csv = String::from("region,pre_percent,mean_estimated_tau,true_tau,coverage\n");
        for region in [Region::Inclusion, Region::Background, Region::Whole] {
            match compute_pre(&tc, region, &inclusion) {
                Ok(p) => {
                    let _ = writeln!(
                        csv,
                        "{},{},{},{},{}",
                        region.name(),
                        p.pre_percent,
                        p.mean_estimated_tau,
                        p.true_tau,
                        p.coverage
                    );
                }
                Err(Error::EmptyRegion(_)) => {
                    let _ = writeln!(csv, "{},NaN,NaN,NaN,0", region.name());
                }
                Err(e) => return Err(e.into()),
            }
        }
        write_file(&out.join("pre.csv"), csv)?;
    }
    Ok(resolved)
}

fn grid(a: &GridArgs, out: &Path) -> CliResult<Vec<(String, String)>> {
    let spec = GridSpec {
        samples: a.sample.clone(),
        methods: a.methods.clone(),
        snrs_db: a.snr_db.clone(),
        good_fractions: a.good_fraction.clone(),
        trials: a.trials,
        seed: a.seed,
        bad_frame_snr_db: a.bad_snr_db,
        resolution: a.size.map(|s| (s, s)),
        lm: a.lm.config(),
        kalman: a.kalman.spec(),
        keep_maps: a.emit_maps,
    };
    let output = run_grid(&spec)?;
    write_file(&out.join("grid.csv"), results_to_csv(&output.results))?;
    write_file(&out.join("timing.csv"), timing_to_csv(&output.results))?;
    let mut tables = String::new();
    for &sample in &a.sample {
        for region in GridRegion::ALL {
            tables.push_str(&format_table(&output.results, sample, region));
            tables.push('\n');
        }
    }
    write_file(&out.join("grid_table.txt"), tables)?;
    if a.emit_maps {
        let maps_dir = out.join("maps");
        fs::create_dir_all(&maps_dir).map_err(|e| Failure::usage(format!("{}: {e}", maps_dir.display())))?;
        for (key, tc) in &output.maps {
            io::write_map_files(&maps_dir, &format!("{}_tau", key.label()), &tc.tau_map, Some(&tc.converged_mask))?;
        }
    }
    let mut resolved = lm_resolved(&spec.lm);
    resolved.push(("cells".into(), (output.results.len() / GridRegion::ALL.len()).to_string()));
    Ok(resolved)
}

fn demo(a: &DemoArgs, out: &Path) -> CliResult<Vec<(String, String)>> {
    let spec = load_phantom(&a.phantom)?;
    let (row, col) = a.pixel.unwrap_or_else(|| {
        let (cx, cy) = spec.inclusion_center;
        let col = (cx / spec.field_width_m * spec.width_px as f64) as usize;
        let row = (cy / spec.field_height_m * spec.height_px as f64) as usize;
        (row.min(spec.height_px - 1), col.min(spec.width_px - 1))
    });
    if row >= spec.height_px || col >= spec.width_px {
        return Err(Failure::usage(format!("pixel {row},{col} is outside the image")));
    }
    let pixel = row * spec.width_px + col;
    let noise = NoiseSpec {
        base_snr_db: a.noise.snr_db,
        bad_frame_snr_db: a.noise.bad_snr_db,
        good_frame_fraction: a.noise.good_fraction,
        rng_seed: a.noise.seed,
    };
    let clean = synth_incremental(&spec)?;
    let mask = place_bad_frames(clean.n_frames(), &noise)?;
    let noisy = add_noise(&clean, &mask, &noise)?;
    let kalman = Method::Kalman.apply(&noisy, &mask, &a.kalman.spec())?;
    let spline = Method::Spline.apply(&noisy, &mask, &a.kalman.spec())?;

    let times = clean.times();
    let cfg = a.lm.config();
    let names = ["clean", "noisy", "kalman", "spline"];
    let mut curves = Vec::new();
    let mut fits: Vec<ExpFit> = Vec::new();
    for stack in [&clean, &noisy, &kalman, &spline] {
        let curve = cumulate(stack)?.pixel_series(pixel);
        fits.push(fit_exponential(&times, &curve, &cfg)?);
        curves.push(curve);
    }

    let mut csv = String::from("time_s,label");
    for n in names {
        let _ = write!(csv, ",{n},{n}_fit");
    }
    csv.push('\n');
    for (k, &t) in times.iter().enumerate() {
        let _ = write!(csv, "{t},{}", if mask.is_good(k) { "good" } else { "bad" });
        for (curve, fit) in curves.iter().zip(&fits) {
            let _ = write!(csv, ",{},{}", curve[k], fit.eval(t));
        }
        csv.push('\n');
    }
    write_file(&out.join("demo_curves.csv"), csv)?;

    let truth = *tau_map(&spec)?.get(row, col);
    let mut summary = String::from("series,eta,gamma,tau,true_tau,converged,iterations\n");
    for (n, f) in names.iter().zip(&fits) {
        let _ = writeln!(
            summary,
            "{n},{},{},{},{truth},{},{}",
            f.eta, f.gamma, f.tau, f.converged, f.iterations
        );
    }
    write_file(&out.join("demo_fits.csv"), summary)?;
    let mut resolved = phantom_resolved(&spec);
    resolved.push(("pixel".into(), format!("{row},{col}")));
    Ok(resolved)
}

trait CloneMap<T> {
    fn clone_map<U>(&self, f: impl Fn(T) -> U) -> strain_tc::PixelMap<U>;
}

impl<T: Copy> CloneMap<T> for strain_tc::PixelMap<T> {
    fn clone_map<U>(&self, f: impl Fn(T) -> U) -> strain_tc::PixelMap<U> {
        strain_tc::PixelMap::from_vec(self.height, self.width, self.data.iter().map(|&v| f(v)).collect())
    }
}
