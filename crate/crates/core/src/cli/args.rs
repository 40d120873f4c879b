use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use strain_tc::eval::Method;
use strain_tc::fit::LMConfig;
use strain_tc::kalman::{KalmanSpec, MeasurementNoise};
use strain_tc::phantom::Sample;

pub const OUT_DIR_ENV: &str = "STRAIN_TC_OUT_DIR";

/// Strain time-constant estimation with spline reconstruction of bad frames.
#[derive(Debug, Parser)]
#[command(name = "strain-tc", version)]
pub struct Cli {
    /// Re-run the command recorded in a manifest file.
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,

    /// Directory for all outputs; must already exist.
    #[arg(long, global = true, env = OUT_DIR_ENV, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write clean incremental and cumulative stacks for a phantom.
    Synth(SynthArgs),
    /// Add noise and bad frames to an incremental stack.
    Degrade(DegradeArgs),
    /// Denoise a degraded incremental stack.
    Reconstruct(ReconstructArgs),
    /// Fit the creep model per pixel and write the TC image.
    Fit(FitArgs),
    /// Run the method comparison grid and write PRE tables.
    Grid(GridArgs),
    /// Run one cell end to end and dump the curves of one pixel.
    Demo(DemoArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Degrade(_) => "degrade",
            Command::Reconstruct(_) => "reconstruct",
            Command::Fit(_) => "fit",
            Command::Grid(_) => "grid",
            Command::Demo(_) => "demo",
        }
    }

    /// Every flag with its resolved value, for the manifest.
    pub fn manifest_args(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        match self {
            Command::Synth(a) => a.phantom.push(&mut out),
            Command::Degrade(a) => {
                out.push(("input", a.input.display().to_string()));
                a.noise.push(&mut out);
            }
            Command::Reconstruct(a) => {
                out.push(("input", a.input.display().to_string()));
                if let Some(m) = &a.mask {
                    out.push(("mask", m.display().to_string()));
                }
                out.push(("method", a.method.to_string()));
                a.kalman.push(&mut out);
            }
            Command::Fit(a) => {
                out.push(("input", a.input.display().to_string()));
                a.phantom.push(&mut out);
                a.lm.push(&mut out);
            }
            Command::Grid(a) => {
                out.push(("sample", join(&a.sample)));
                out.push(("methods", join(&a.methods)));
                out.push(("snr-db", join(&a.snr_db)));
                out.push(("good-fraction", join(&a.good_fraction)));
                out.push(("bad-snr-db", a.bad_snr_db.to_string()));
                out.push(("trials", a.trials.to_string()));
                out.push(("seed", a.seed.to_string()));
                if let Some(s) = a.size {
                    out.push(("size", s.to_string()));
                }
                out.push(("emit-maps", a.emit_maps.to_string()));
                a.kalman.push(&mut out);
                a.lm.push(&mut out);
            }
            Command::Demo(a) => {
                a.phantom.push(&mut out);
                a.noise.push(&mut out);
                if let Some((r, c)) = a.pixel {
                    out.push(("pixel", format!("{r},{c}")));
                }
                a.kalman.push(&mut out);
                a.lm.push(&mut out);
            }
        }
        out
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone, Args)]
pub struct PhantomArgs {
    /// Built-in sample preset.
    #[arg(long, value_parser = parse_sample)]
    pub preset: Option<Sample>,
    /// Phantom config file (`key = value` lines).
    #[arg(long, value_name = "FILE", conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Override image width in pixels.
    #[arg(long)]
    pub width: Option<usize>,
    /// Override image height in pixels.
    #[arg(long)]
    pub height: Option<usize>,
}

impl PhantomArgs {
    pub fn is_given(&self) -> bool {
        self.preset.is_some() || self.config.is_some()
    }

    fn push(&self, out: &mut Vec<(&'static str, String)>) {
        if let Some(p) = self.preset {
            out.push(("preset", p.to_string()));
        }
        if let Some(c) = &self.config {
            out.push(("config", c.display().to_string()));
        }
        if let Some(w) = self.width {
            out.push(("width", w.to_string()));
        }
        if let Some(h) = self.height {
            out.push(("height", h.to_string()));
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct NoiseArgs {
    /// SNR of good frames, dB.
    #[arg(long, default_value_t = 60.0, allow_negative_numbers = true)]
    pub snr_db: f64,
    /// SNR of bad frames, dB.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub bad_snr_db: f64,
    /// Fraction of frames kept at the base SNR.
    #[arg(long, default_value_t = 0.75)]
    pub good_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl NoiseArgs {
    fn push(&self, out: &mut Vec<(&'static str, String)>) {
        out.push(("snr-db", self.snr_db.to_string()));
        out.push(("bad-snr-db", self.bad_snr_db.to_string()));
        out.push(("good-fraction", self.good_fraction.to_string()));
        out.push(("seed", self.seed.to_string()));
    }
}

#[derive(Debug, Clone, Args)]
pub struct KalmanArgs {
    /// Smoothing window length in frames (current frame included).
    #[arg(long, default_value_t = 13)]
    pub kalman_window: usize,
    /// Process noise variance; default equals the measurement noise.
    #[arg(long)]
    pub kalman_q: Option<f64>,
    /// Measurement noise variance, or `auto` to estimate per pixel.
    #[arg(long, default_value = "auto", value_parser = parse_measurement_noise)]
    pub kalman_r: MeasurementNoise,
}

impl KalmanArgs {
    pub fn spec(&self) -> KalmanSpec {
        KalmanSpec {
            window_len: self.kalman_window,
            process_noise_var: self.kalman_q,
            measurement_noise_var: self.kalman_r,
        }
    }

    fn push(&self, out: &mut Vec<(&'static str, String)>) {
        out.push(("kalman-window", self.kalman_window.to_string()));
        if let Some(q) = self.kalman_q {
            out.push(("kalman-q", q.to_string()));
        }
        let r = match self.kalman_r {
            MeasurementNoise::Auto => "auto".to_string(),
            MeasurementNoise::Explicit(r) => r.to_string(),
        };
        out.push(("kalman-r", r));
    }
}

#[derive(Debug, Clone, Args)]
pub struct LmArgs {
    #[arg(long, default_value_t = 200)]
    pub lm_max_iter: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub lm_tol: f64,
}

impl LmArgs {
    pub fn config(&self) -> LMConfig {
        LMConfig { max_iterations: self.lm_max_iter, rel_tolerance: self.lm_tol, ..LMConfig::default() }
    }

    fn push(&self, out: &mut Vec<(&'static str, String)>) {
        out.push(("lm-max-iter", self.lm_max_iter.to_string()));
        out.push(("lm-tol", self.lm_tol.to_string()));
    }
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub phantom: PhantomArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DegradeArgs {
    /// Clean incremental stack file.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub noise: NoiseArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReconstructArgs {
    /// Degraded incremental stack file.
    #[arg(long)]
    pub input: PathBuf,
    /// Frame quality mask CSV; required for the spline method.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long, default_value = "spline", value_parser = parse_method)]
    pub method: Method,
    #[command(flatten)]
    pub kalman: KalmanArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Cumulative stack (incremental stacks are cumulated first).
    #[arg(long)]
    pub input: PathBuf,
    /// Phantom providing the true TC map for PRE.
    #[command(flatten)]
    pub phantom: PhantomArgs,
    #[command(flatten)]
    pub lm: LmArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// Samples to run (A, B, C).
    #[arg(long, value_delimiter = ',', default_value = "A,B,C", value_parser = parse_sample)]
    pub sample: Vec<Sample>,
    #[arg(long, value_delimiter = ',', default_value = "noisy,kalman,spline", value_parser = parse_method)]
    pub methods: Vec<Method>,
    /// Good-frame SNR levels, dB.
    #[arg(long, value_delimiter = ',', default_value = "30,40,60")]
    pub snr_db: Vec<f64>,
    /// Good-frame fractions.
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.5,0.75")]
    pub good_fraction: Vec<f64>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub bad_snr_db: f64,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Square image size override (e.g. 32 for a quick run).
    #[arg(long)]
    pub size: Option<usize>,
    /// Write the first trial's TC image of every cell.
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set, num_args = 0..=1, default_missing_value = "true")]
    pub emit_maps: bool,
    #[command(flatten)]
    pub kalman: KalmanArgs,
    #[command(flatten)]
    pub lm: LmArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DemoArgs {
    #[command(flatten)]
    pub phantom: PhantomArgs,
    #[command(flatten)]
    pub noise: NoiseArgs,
    /// Pixel to dump as `row,col`; defaults to the inclusion center.
    #[arg(long, value_parser = parse_pixel)]
    pub pixel: Option<(usize, usize)>,
    #[command(flatten)]
    pub kalman: KalmanArgs,
    #[command(flatten)]
    pub lm: LmArgs,
}

fn parse_sample(s: &str) -> Result<Sample, String> {
    s.parse().map_err(|e: strain_tc::Error| e.to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: strain_tc::Error| e.to_string())
}

fn parse_measurement_noise(s: &str) -> Result<MeasurementNoise, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(MeasurementNoise::Auto);
    }
    s.parse::<f64>().map(MeasurementNoise::Explicit).map_err(|e| format!("expected `auto` or a number: {e}"))
}

fn parse_pixel(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s.split_once(',').ok_or("expected row,col")?;
    let p = |v: &str| v.trim().parse::<usize>().map_err(|e| e.to_string());
    Ok((p(r)?, p(c)?))
}
