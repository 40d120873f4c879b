//! Percent relative error of TC images and the method comparison grid.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use crate::degrade::{add_noise, place_bad_frames, FrameLabel, FrameQualityMask, NoiseSpec};
use crate::error::{Error, Result};
use crate::fit::{cumulate, fit_stack, LMConfig, TCImage};
use crate::kalman::{kalman_denoise, KalmanSpec};
use crate::map::PixelMap;
use crate::phantom::{synth_incremental, tau_map, PhantomSpec, Sample};
use crate::spline::reconstruct_stack;
use crate::stack::StrainStack;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Region {
    Inclusion,
    Background,
    Whole,
}

impl Region {
    pub fn name(self) -> &'static str {
        match self {
            Region::Inclusion => "inclusion",
            Region::Background => "background",
            Region::Whole => "whole",
        }
    }

    fn contains(self, inside_inclusion: bool) -> bool {
        match self {
            Region::Inclusion => inside_inclusion,
            Region::Background => !inside_inclusion,
            Region::Whole => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PREResult {
    pub region: Region,
    /// Signed percent relative error of the region mean.
    pub pre_percent: f64,
    pub mean_estimated_tau: f64,
    pub true_tau: f64,
    /// Fraction of the region's pixels whose fit converged.
    pub coverage: f64,
}

/// Percent relative error of the mean converged estimate in `region` against
/// the mean true value over the same pixels.
pub fn compute_pre(tc: &TCImage, region: Region, inclusion: &PixelMap<bool>) -> Result<PREResult> {
    let truth = tc
        .truth_map
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("TC image has no truth map".into()))?;
    if !tc.tau_map.same_shape(inclusion) || !tc.tau_map.same_shape(truth) {
        return Err(Error::ShapeMismatch("TC image, truth and region maps differ in shape".into()));
    }
    let (mut est, mut tru, mut used, mut total) = (0.0, 0.0, 0usize, 0usize);
    for i in 0..tc.tau_map.len() {
        if !region.contains(inclusion.data[i]) {
            continue;
        }
        total += 1;
        if tc.converged_mask.data[i] {
            est += tc.tau_map.data[i];
            tru += truth.data[i];
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::EmptyRegion(region.name()));
    }
    let mean_est = est / used as f64;
    let mean_true = tru / used as f64;
    Ok(PREResult {
        region,
        pre_percent: (mean_est - mean_true) / mean_true * 100.0,
        mean_estimated_tau: mean_est,
        true_tau: mean_true,
        coverage: used as f64 / total as f64,
    })
}

/// Denoising applied before the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Noisy,
    Kalman,
    Spline,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Noisy, Method::Kalman, Method::Spline];

    pub fn name(self) -> &'static str {
        match self {
            Method::Noisy => "noisy",
            Method::Kalman => "kalman",
            Method::Spline => "spline",
        }
    }

    /// Apply to a degraded incremental stack.
    pub fn apply(self, stack: &StrainStack, mask: &FrameQualityMask, kalman: &KalmanSpec) -> Result<StrainStack> {
        match self {
            Method::Noisy => Ok(stack.clone()),
            Method::Kalman => kalman_denoise(stack, kalman),
            Method::Spline => reconstruct_stack(stack, mask),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "noisy" | "none" => Ok(Method::Noisy),
            "kalman" => Ok(Method::Kalman),
            "spline" => Ok(Method::Spline),
            other => Err(Error::InvalidParameter(format!("unknown method {other:?}"))),
        }
    }
}

/// Region reported in grid tables. `Combined` is the pixel-count-weighted
/// mean of the inclusion and background |PRE|.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GridRegion {
    Combined,
    Inclusion,
    Background,
}

impl GridRegion {
    pub const ALL: [GridRegion; 3] = [GridRegion::Combined, GridRegion::Inclusion, GridRegion::Background];

    pub fn name(self) -> &'static str {
        match self {
            GridRegion::Combined => "combined",
            GridRegion::Inclusion => "inclusion",
            GridRegion::Background => "background",
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridSpec {
    pub samples: Vec<Sample>,
    pub methods: Vec<Method>,
    pub snrs_db: Vec<f64>,
    pub good_fractions: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub bad_frame_snr_db: f64,
    /// Override the presets' 128 x 128 resolution.
    pub resolution: Option<(usize, usize)>,
    pub lm: LMConfig,
    pub kalman: KalmanSpec,
    /// Keep the first trial's TC image of every cell.
    pub keep_maps: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            samples: Sample::ALL.to_vec(),
            methods: Method::ALL.to_vec(),
            snrs_db: vec![30.0, 40.0, 60.0],
            good_fractions: vec![0.20, 0.50, 0.75],
            trials: 10,
            seed: 0,
            bad_frame_snr_db: 0.0,
            resolution: None,
            lm: LMConfig::default(),
            kalman: KalmanSpec::default(),
            keep_maps: false,
        }
    }
}

impl GridSpec {
    pub fn phantom(&self, sample: Sample) -> PhantomSpec {
        let spec = PhantomSpec::preset(sample);
        match self.resolution {
            Some((w, h)) => spec.with_resolution(w, h),
            None => spec,
        }
    }

    /// Noise seed of one trial. Independent of the method, so all methods in
    /// a cell see the same degraded data.
    pub fn trial_seed(&self, sample: Sample, snr_db: f64, fraction: f64, trial: usize) -> u64 {
        let mut h = splitmix64(self.seed);
        for word in [sample as u64, snr_db.to_bits(), fraction.to_bits(), trial as u64] {
            h = splitmix64(h ^ word);
        }
        h
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellKey {
    pub sample: Sample,
    pub method: Method,
    /// Stored as `f64::to_bits` so the key is orderable.
    snr_bits: u64,
    fraction_bits: u64,
}

impl CellKey {
    pub fn new(sample: Sample, method: Method, snr_db: f64, good_fraction: f64) -> Self {
        Self { sample, method, snr_bits: snr_db.to_bits(), fraction_bits: good_fraction.to_bits() }
    }

    pub fn snr_db(&self) -> f64 {
        f64::from_bits(self.snr_bits)
    }

    pub fn good_fraction(&self) -> f64 {
        f64::from_bits(self.fraction_bits)
    }

    /// File-name friendly label, e.g. `A_spline_snr60_pgf75`.
    pub fn label(&self) -> String {
        format!(
            "{}_{}_snr{}_pgf{}",
            self.sample,
            self.method,
            self.snr_db(),
            (self.good_fraction() * 100.0).round()
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub sample: Sample,
    pub method: Method,
    pub snr_db: f64,
    pub good_fraction: f64,
    pub region: GridRegion,
    /// Trials that produced a PRE for this region.
    pub trials: usize,
    /// Mean |PRE| over trials, percent.
    pub pre_mean: f64,
    /// Sample standard deviation of |PRE| over trials.
    pub pre_std: f64,
    /// Mean signed PRE; NaN for the combined region.
    pub pre_signed_mean: f64,
    pub coverage: f64,
    /// Mean wall time per trial of denoise + cumulate + fit.
    pub wall_time_s: f64,
    /// Trials that failed outright (e.g. no converged pixel in the region).
    pub failures: usize,
}

impl GridResult {
    pub fn key(&self) -> CellKey {
        CellKey::new(self.sample, self.method, self.snr_db, self.good_fraction)
    }
}

#[derive(Debug, Clone, Default)]
pub struct GridOutput {
    pub results: Vec<GridResult>,
    pub maps: Vec<(CellKey, TCImage)>,
}

impl GridOutput {
    pub fn get(&self, key: CellKey, region: GridRegion) -> Option<&GridResult> {
        self.results.iter().find(|r| r.key() == key && r.region == region)
    }
}

#[derive(Default)]
struct Accum {
    abs: BTreeMap<GridRegion, Vec<f64>>,
    signed: BTreeMap<GridRegion, Vec<f64>>,
    coverage: BTreeMap<GridRegion, Vec<f64>>,
    failures: BTreeMap<GridRegion, usize>,
    seconds: f64,
    runs: usize,
}

/// One trial of one method: PRE per region.
fn score(tc: &TCImage, inclusion: &PixelMap<bool>) -> BTreeMap<GridRegion, Result<(f64, f64, f64)>> {
    let n_inc = inclusion.data.iter().filter(|&&b| b).count() as f64;
    let n_bg = inclusion.len() as f64 - n_inc;
    let inc = (n_inc > 0.0).then(|| compute_pre(tc, Region::Inclusion, inclusion));
    let bg = (n_bg > 0.0).then(|| compute_pre(tc, Region::Background, inclusion));
    let mut out = BTreeMap::new();
    let as_tuple = |r: &Result<PREResult>| match r {
        Ok(p) => Ok((p.pre_percent.abs(), p.pre_percent, p.coverage)),
        Err(Error::EmptyRegion(name)) => Err(Error::EmptyRegion(name)),
        Err(e) => Err(Error::InvalidParameter(e.to_string())),
    };
    if let Some(r) = &inc {
        out.insert(GridRegion::Inclusion, as_tuple(r));
    }
    if let Some(r) = &bg {
        out.insert(GridRegion::Background, as_tuple(r));
    }
    let combined = match (&inc, &bg) {
        (Some(Err(e)), _) | (_, Some(Err(e))) => Err(Error::InvalidParameter(e.to_string())),
        _ => {
            let part = |r: &Option<Result<PREResult>>, n: f64| match r {
                Some(Ok(p)) => n * p.pre_percent.abs(),
                _ => 0.0,
            };
            let value = (part(&inc, n_inc) + part(&bg, n_bg)) / (n_inc + n_bg);
            Ok((value, f64::NAN, tc.coverage()))
        }
    };
    out.insert(GridRegion::Combined, combined);
    out
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// Synthesize, degrade, denoise, fit and score every cell of the grid.
///
/// Cells run in a fixed order and every random draw is keyed by
/// [`GridSpec::trial_seed`], so results are reproducible. Failures inside a
/// cell are counted in [`GridResult::failures`] rather than aborting the run.
pub fn run_grid(spec: &GridSpec) -> Result<GridOutput> {
    if spec.trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    spec.lm.validate()?;
    spec.kalman.validate()?;
    let mut accums: BTreeMap<CellKey, Accum> = BTreeMap::new();
    let mut maps = Vec::new();

    for &sample in &spec.samples {
        let phantom = spec.phantom(sample);
        let clean = synth_incremental(&phantom)?;
        let truth = tau_map(&phantom)?;
        let inclusion = phantom.inclusion_mask();
        for &snr in &spec.snrs_db {
            for &fraction in &spec.good_fractions {
                for trial in 0..spec.trials {
                    let noise = NoiseSpec {
                        base_snr_db: snr,
                        bad_frame_snr_db: spec.bad_frame_snr_db,
                        good_frame_fraction: fraction,
                        rng_seed: spec.trial_seed(sample, snr, fraction, trial),
                    };
                    let degraded = place_bad_frames(clean.n_frames(), &noise)
                        .and_then(|mask| Ok((add_noise(&clean, &mask, &noise)?, mask)));
                    for &method in &spec.methods {
                        let key = CellKey::new(sample, method, snr, fraction);
                        let acc = accums.entry(key).or_default();
                        let started = Instant::now();
                        let tc = degraded.as_ref().map_err(|e| Error::InvalidParameter(e.to_string())).and_then(
                            |(noisy, mask)| {
                                let denoised = method.apply(noisy, mask, &spec.kalman)?;
                                fit_stack(&cumulate(&denoised)?, &spec.lm, Some(&truth))
                            },
                        );
                        acc.seconds += started.elapsed().as_secs_f64();
                        acc.runs += 1;
                        match tc {
                            Ok(tc) => {
                                for (region, r) in score(&tc, &inclusion) {
                                    match r {
                                        Ok((abs, signed, cov)) => {
                                            acc.abs.entry(region).or_default().push(abs);
                                            acc.signed.entry(region).or_default().push(signed);
                                            acc.coverage.entry(region).or_default().push(cov);
                                        }
                                        Err(_) => *acc.failures.entry(region).or_default() += 1,
                                    }
                                }
                                if spec.keep_maps && trial == 0 {
                                    maps.push((key, tc));
                                }
                            }
                            Err(_) => {
                                for region in GridRegion::ALL {
                                    *acc.failures.entry(region).or_default() += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    let mut results = Vec::new();
    for (key, acc) in &accums {
        for region in GridRegion::ALL {
            let abs = acc.abs.get(&region).map(Vec::as_slice).unwrap_or(&[]);
            let failures = acc.failures.get(&region).copied().unwrap_or(0);
            if abs.is_empty() && failures == 0 {
                continue;
            }
            let (pre_mean, pre_std) = mean_std(abs);
            let signed = acc.signed.get(&region).map(Vec::as_slice).unwrap_or(&[]);
            let coverage = acc.coverage.get(&region).map(Vec::as_slice).unwrap_or(&[]);
            results.push(GridResult {
                sample: key.sample,
                method: key.method,
                snr_db: key.snr_db(),
                good_fraction: key.good_fraction(),
                region,
                trials: abs.len(),
                pre_mean,
                pre_std,
                pre_signed_mean: mean_std(signed).0,
                coverage: mean_std(coverage).0,
                wall_time_s: acc.seconds / acc.runs as f64,
                failures,
            });
        }
    }
    // Deterministic output order: sample, method, SNR, fraction, region.
    results.sort_by(|a, b| {
        a.sample
            .cmp(&b.sample)
            .then(a.method.cmp(&b.method))
            .then(a.snr_db.total_cmp(&b.snr_db))
            .then(a.good_fraction.total_cmp(&b.good_fraction))
            .then(a.region.cmp(&b.region))
    });
    Ok(GridOutput { results, maps })
}

/// Grid results as CSV. Wall time is left out so that re-runs are
/// byte-identical; see [`timing_to_csv`].
pub fn results_to_csv(results: &[GridResult]) -> String {
    let mut out = String::from(
        "sample,method,snr_db,good_fraction,region,trials,pre_mean,pre_std,pre_signed_mean,coverage,failures\n",
    );
    for r in results {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{}",
            r.sample,
            r.method,
            r.snr_db,
            r.good_fraction,
            r.region.name(),
            r.trials,
            r.pre_mean,
            r.pre_std,
            r.pre_signed_mean,
            r.coverage,
            r.failures
        );
    }
    out
}

/// Mean wall time per trial for each cell.
pub fn timing_to_csv(results: &[GridResult]) -> String {
    let mut out = String::from("sample,method,snr_db,good_fraction,wall_time_s\n");
    for r in results.iter().filter(|r| r.region == GridRegion::Combined) {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6}",
            r.sample, r.method, r.snr_db, r.good_fraction, r.wall_time_s
        );
    }
    out
}

/// Plain-text table of mean |PRE| for one sample and region: one row per
/// method, columns grouped by good-frame percentage then SNR.
pub fn format_table(results: &[GridResult], sample: Sample, region: GridRegion) -> String {
    let rows: Vec<&GridResult> =
        results.iter().filter(|r| r.sample == sample && r.region == region).collect();
    let mut fractions: Vec<f64> = rows.iter().map(|r| r.good_fraction).collect();
    fractions.sort_by(f64::total_cmp);
    fractions.dedup();
    let mut snrs: Vec<f64> = rows.iter().map(|r| r.snr_db).collect();
    snrs.sort_by(f64::total_cmp);
    snrs.dedup();
    let mut methods: Vec<Method> = rows.iter().map(|r| r.method).collect();
    methods.sort();
    methods.dedup();

    let cell = 8;
    let group = cell * snrs.len();
    let mut out = String::new();
    let _ = writeln!(out, "PRE (%) in estimated TC, sample {sample}, {} region", region.name());
    let _ = write!(out, "{:<10}", "PGF (%)");
    for f in &fractions {
        let _ = write!(out, "{:<group$}", format!("{}", (f * 100.0).round()));
    }
    out.push('\n');
    let _ = write!(out, "{:<10}", "SNR (dB)");
    for _ in &fractions {
        for s in &snrs {
            let _ = write!(out, "{:<cell$}", format!("{s}"));
        }
    }
    out.push('\n');
    for m in methods {
        let mut name = m.name().to_string();
        name[..1].make_ascii_uppercase();
        let _ = write!(out, "{name:<10}");
        for &f in &fractions {
            for &s in &snrs {
                let v = rows
                    .iter()
                    .find(|r| r.method == m && r.snr_db == s && r.good_fraction == f)
                    .map(|r| r.pre_mean);
                let text = match v {
                    Some(v) if v.is_finite() => format!("{v:.2}"),
                    _ => "-".to_string(),
                };
                let _ = write!(out, "{text:<cell$}");
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectConfig {
    /// Half-width of the temporal moving-median window.
    pub half_window: usize,
    /// Flag frames whose score exceeds `threshold_k` times the global scale.
    pub threshold_k: f64,
    /// Lower bound on the global scale, as a fraction of signal magnitude.
    pub min_scale: f64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self { half_window: 3, threshold_k: 4.0, min_scale: 1e-3 }
    }
}

fn median(values: &mut [f64]) -> f64 {
    let n = values.len();
    let mid = n / 2;
    let (_, &mut hi, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    if n % 2 == 1 {
        hi
    } else {
        let lo = values[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    }
}

/// Heuristic bad-frame detector for stacks without known labels.
///
/// Each frame is compared with a per-pixel temporal moving median (window
/// shrunk symmetrically at the ends, so the first and last frames are never
/// flagged). The frame score is the spatial median of the absolute deviation
/// divided by the spatial median magnitude of the reference. A frame is bad
/// when its score exceeds `threshold_k * max(median score, min_scale)`.
pub fn detect_bad_frames(stack: &StrainStack, config: &DetectConfig) -> Result<FrameQualityMask> {
    let n = stack.n_frames();
    if n < 8 {
        return Err(Error::InvalidParameter(format!("need at least 8 frames, got {n}")));
    }
    let n_pixels = stack.n_pixels();
    let scores: Vec<Option<f64>> = (0..n)
        .map(|f| {
            let w = config.half_window.min(f).min(n - 1 - f);
            if w == 0 {
                return None;
            }
            let mut dev = Vec::with_capacity(n_pixels);
            let mut mag = Vec::with_capacity(n_pixels);
            let mut window = vec![0.0; 2 * w + 1];
            for p in 0..n_pixels {
                for (slot, k) in window.iter_mut().zip(f - w..=f + w) {
                    *slot = stack.data()[k * n_pixels + p];
                }
                let reference = median(&mut window);
                dev.push((stack.data()[f * n_pixels + p] - reference).abs());
                mag.push(reference.abs());
            }
            let (d, m) = (median(&mut dev), median(&mut mag));
            Some(if d == 0.0 { 0.0 } else if m == 0.0 { f64::INFINITY } else { d / m })
        })
        .collect();
    let mut finite: Vec<f64> = scores.iter().flatten().copied().filter(|s| s.is_finite()).collect();
    let scale = if finite.is_empty() { 0.0 } else { median(&mut finite) };
    let threshold = config.threshold_k * scale.max(config.min_scale);
    let labels = scores
        .iter()
        .map(|s| match s {
            Some(s) if *s > threshold => FrameLabel::Bad,
            _ => FrameLabel::Good,
        })
        .collect();
    Ok(FrameQualityMask { labels, applied_snr_db: vec![f64::NAN; n] })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(est: Vec<f64>, truth: Vec<f64>, w: usize) -> TCImage {
        let h = est.len() / w;
        TCImage {
            converged_mask: PixelMap::filled(h, w, true),
            tau_map: PixelMap::from_vec(h, w, est),
            truth_map: Some(PixelMap::from_vec(h, w, truth)),
        }
    }

    #[test]
    fn identity_estimate_has_zero_pre() {
        let truth = vec![4.66, 4.66, 11.42, 11.42, 11.42, 4.66];
        let tc = image(truth.clone(), truth, 3);
        let inc = PixelMap::from_vec(2, 3, vec![true, true, false, false, false, true]);
        for region in [Region::Inclusion, Region::Background, Region::Whole] {
            assert_eq!(compute_pre(&tc, region, &inc).unwrap().pre_percent, 0.0);
        }
    }

    #[test]
    fn pre_arithmetic() {
        let inc = PixelMap::from_vec(1, 4, vec![true, true, false, false]);
        let tc = image(vec![9.32, 9.32, 11.42, 11.42], vec![4.66, 4.66, 11.42, 11.42], 4);
        let p = compute_pre(&tc, Region::Inclusion, &inc).unwrap();
        assert!((p.pre_percent - 100.0).abs() < 1e-12);
        assert_eq!(p.coverage, 1.0);

        let tc = image(vec![5.0; 4], vec![4.0; 4], 4);
        let p = compute_pre(&tc, Region::Whole, &inc).unwrap();
        assert!((p.pre_percent - 25.0).abs() < 1e-12);
    }

    #[test]
    fn non_converged_pixels_are_excluded() {
        let inc = PixelMap::from_vec(1, 4, vec![true; 4]);
        let mut tc = image(vec![4.0, 1e6, 4.0, 4.0], vec![4.0; 4], 4);
        tc.converged_mask.data[1] = false;
        let p = compute_pre(&tc, Region::Inclusion, &inc).unwrap();
        assert_eq!(p.pre_percent, 0.0);
        assert_eq!(p.coverage, 0.75);
        tc.converged_mask.data.fill(false);
        assert!(matches!(compute_pre(&tc, Region::Inclusion, &inc), Err(Error::EmptyRegion(_))));
        tc.truth_map = None;
        assert!(compute_pre(&tc, Region::Inclusion, &inc).is_err());
    }

    #[test]
    fn seeds_depend_on_cell_not_method() {
        let spec = GridSpec::default();
        let a = spec.trial_seed(Sample::A, 30.0, 0.2, 0);
        assert_eq!(a, spec.trial_seed(Sample::A, 30.0, 0.2, 0));
        assert_ne!(a, spec.trial_seed(Sample::A, 30.0, 0.2, 1));
        assert_ne!(a, spec.trial_seed(Sample::B, 30.0, 0.2, 0));
        assert_ne!(a, spec.trial_seed(Sample::A, 40.0, 0.2, 0));
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn detector_on_clean_and_constant_stacks() {
        let spec = PhantomSpec::preset(Sample::A).with_resolution(8, 8);
        let clean = synth_incremental(&spec).unwrap();
        let mask = detect_bad_frames(&clean, &DetectConfig::default()).unwrap();
        assert_eq!(mask.good_count(), clean.n_frames());

        let same = StrainStack::new(20, 2, 2, 0.5, crate::StackKind::Incremental, vec![0.3; 80]).unwrap();
        assert_eq!(detect_bad_frames(&same, &DetectConfig::default()).unwrap().good_count(), 20);

        let short = StrainStack::new(7, 1, 1, 0.5, crate::StackKind::Incremental, vec![0.3; 7]).unwrap();
        assert!(detect_bad_frames(&short, &DetectConfig::default()).is_err());
    }

    #[test]
    fn table_layout() {
        let spec = GridSpec {
            samples: vec![Sample::A],
            methods: vec![Method::Noisy, Method::Spline],
            snrs_db: vec![60.0],
            good_fractions: vec![0.5, 1.0],
            trials: 1,
            resolution: Some((6, 6)),
            ..GridSpec::default()
        };
        let out = run_grid(&spec).unwrap();
        let table = format_table(&out.results, Sample::A, GridRegion::Combined);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("PGF (%)   50"));
        assert!(lines[3].starts_with("Noisy"));
        assert!(lines[4].starts_with("Spline"));
    }
}
