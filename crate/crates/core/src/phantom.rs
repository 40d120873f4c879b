//! Ground-truth creep-strain stacks for a 2-D plane through a cylindrical
//! sample with a circular inclusion.
//!
//! Each pixel follows the creep model of its region:
//! cumulative `s(t) = eta + gamma * exp(-t / tau)` and incremental
//! `x[n] = -(gamma / tau) * exp(-n T_s / tau) * T_s`.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::map::PixelMap;
use crate::stack::{StackKind, StrainStack};

/// Mechanical and creep parameters of one region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionParams {
    /// Young's modulus, kPa.
    pub young_modulus: f64,
    pub poisson_ratio: f64,
    /// Strain time constant, seconds.
    pub tau: f64,
    /// Steady-state strain.
    pub eta: f64,
    /// Transient amplitude; negative for a creep curve rising toward `eta`.
    pub gamma: f64,
}

impl RegionParams {
    /// Region with the default amplitudes `eta = stress / E`, `gamma = -eta / 2`.
    pub fn from_mechanics(young_modulus: f64, poisson_ratio: f64, tau: f64, stress_kpa: f64) -> Self {
        let eta = stress_kpa / young_modulus;
        Self { young_modulus, poisson_ratio, tau, eta, gamma: -0.5 * eta }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(format!("{name}: {msg}")));
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if !(self.poisson_ratio > 0.0 && self.poisson_ratio < 0.5) {
            return bad(format!("poisson_ratio must lie in (0, 0.5), got {}", self.poisson_ratio));
        }
        if !(self.young_modulus.is_finite() && self.young_modulus > 0.0) {
            return bad(format!("young_modulus must be positive, got {}", self.young_modulus));
        }
        if !(self.eta.is_finite() && self.gamma.is_finite()) {
            return bad("eta and gamma must be finite".into());
        }
        if self.eta + self.gamma < 0.0 {
            return bad(format!("eta + gamma must be >= 0, got {}", self.eta + self.gamma));
        }
        Ok(())
    }

    /// Cumulative strain at time `t`.
    pub fn cumulative(&self, t: f64) -> f64 {
        self.eta + self.gamma * (-t / self.tau).exp()
    }

    /// Strain increment over the interval ending at frame `n` (1-based).
    pub fn increment(&self, n: usize, sample_time_s: f64) -> f64 {
        -(self.gamma / self.tau) * (-(n as f64) * sample_time_s / self.tau).exp() * sample_time_s
    }
}

/// The simulated samples of the comparison study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sample {
    A,
    B,
    C,
}

impl Sample {
    pub const ALL: [Sample; 3] = [Sample::A, Sample::B, Sample::C];

    /// `(E_i, nu_i, tau_i, E_b, nu_b, tau_b)`.
    fn table_values(self) -> (f64, f64, f64, f64, f64, f64) {
        match self {
            Sample::A => (49.17, 0.45, 4.66, 32.78, 0.47, 11.42),
            Sample::B => (97.02, 0.45, 2.36, 32.78, 0.47, 11.42),
            Sample::C => (63.90, 0.47, 2.26, 32.78, 0.49, 3.08),
        }
    }
}

impl fmt::Display for Sample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sample::A => "A",
            Sample::B => "B",
            Sample::C => "C",
        })
    }
}

impl FromStr for Sample {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Sample::A),
            "B" | "b" => Ok(Sample::B),
            "C" | "c" => Ok(Sample::C),
            other => Err(Error::InvalidParameter(format!("unknown sample preset {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub width_px: usize,
    pub height_px: usize,
    pub field_width_m: f64,
    pub field_height_m: f64,
    /// `(x, y)` in meters from the top-left corner of the field.
    pub inclusion_center: (f64, f64),
    pub inclusion_radius_m: f64,
    pub inclusion: RegionParams,
    pub background: RegionParams,
    pub n_frames: usize,
    pub sample_time_s: f64,
    /// Recorded for provenance; only used to derive default amplitudes.
    pub applied_stress_kpa: f64,
}

impl PhantomSpec {
    pub const DEFAULT_STRESS_KPA: f64 = 1.0;

    /// 4 cm x 4 cm field, centered 0.75 cm inclusion, 128 x 128 pixels,
    /// 300 frames at 0.5 s.
    pub fn preset(sample: Sample) -> Self {
        let (ei, nui, taui, eb, nub, taub) = sample.table_values();
        let stress = Self::DEFAULT_STRESS_KPA;
        Self {
            width_px: 128,
            height_px: 128,
            field_width_m: 0.04,
            field_height_m: 0.04,
            inclusion_center: (0.02, 0.02),
            inclusion_radius_m: 0.0075,
            inclusion: RegionParams::from_mechanics(ei, nui, taui, stress),
            background: RegionParams::from_mechanics(eb, nub, taub, stress),
            n_frames: 300,
            sample_time_s: 0.5,
            applied_stress_kpa: stress,
        }
    }

    pub fn with_resolution(mut self, width_px: usize, height_px: usize) -> Self {
        self.width_px = width_px;
        self.height_px = height_px;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.width_px == 0 || self.height_px == 0 {
            return bad("image dimensions must be non-zero".into());
        }
        if !(self.field_width_m > 0.0 && self.field_height_m > 0.0) {
            return bad("field dimensions must be positive".into());
        }
        if self.n_frames < 3 {
            return bad(format!("n_frames must be >= 3, got {}", self.n_frames));
        }
        if !(self.sample_time_s.is_finite() && self.sample_time_s > 0.0) {
            return bad(format!("sample_time_s must be positive, got {}", self.sample_time_s));
        }
        let (cx, cy) = self.inclusion_center;
        let r = self.inclusion_radius_m;
        if !(r >= 0.0)
            || cx - r < 0.0
            || cy - r < 0.0
            || cx + r > self.field_width_m
            || cy + r > self.field_height_m
        {
            return bad("inclusion circle must lie inside the field".into());
        }
        self.inclusion.validate("inclusion")?;
        self.background.validate("background")
    }

    /// `true` where the pixel center lies strictly inside the inclusion.
    pub fn inclusion_mask(&self) -> PixelMap<bool> {
        let (cx, cy) = self.inclusion_center;
        let r2 = self.inclusion_radius_m * self.inclusion_radius_m;
        let dx = self.field_width_m / self.width_px as f64;
        let dy = self.field_height_m / self.height_px as f64;
        let mut data = Vec::with_capacity(self.width_px * self.height_px);
        for row in 0..self.height_px {
            let y = (row as f64 + 0.5) * dy;
            for col in 0..self.width_px {
                let x = (col as f64 + 0.5) * dx;
                data.push((x - cx).powi(2) + (y - cy).powi(2) < r2);
            }
        }
        PixelMap::from_vec(self.height_px, self.width_px, data)
    }

    fn region(&self, inside: bool) -> &RegionParams {
        if inside {
            &self.inclusion
        } else {
            &self.background
        }
    }

    pub fn total_duration_s(&self) -> f64 {
        self.n_frames as f64 * self.sample_time_s
    }

    /// Write as `key = value` lines readable by [`PhantomSpec::from_config_str`].
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("width_px", self.width_px.to_string());
        kv("height_px", self.height_px.to_string());
        kv("field_width_m", self.field_width_m.to_string());
        kv("field_height_m", self.field_height_m.to_string());
        kv(
            "inclusion_center",
            format!("{}, {}", self.inclusion_center.0, self.inclusion_center.1),
        );
        kv("inclusion_radius_m", self.inclusion_radius_m.to_string());
        for (name, p) in [("inclusion", &self.inclusion), ("background", &self.background)] {
            kv(&format!("{name}.young_modulus"), p.young_modulus.to_string());
            kv(&format!("{name}.poisson_ratio"), p.poisson_ratio.to_string());
            kv(&format!("{name}.tau"), p.tau.to_string());
            kv(&format!("{name}.eta"), p.eta.to_string());
            kv(&format!("{name}.gamma"), p.gamma.to_string());
        }
        kv("n_frames", self.n_frames.to_string());
        kv("sample_time_s", self.sample_time_s.to_string());
        kv("applied_stress_kpa", self.applied_stress_kpa.to_string());
        out
    }

    /// Parse `key = value` lines. An optional `preset = A|B|C` line selects
    /// the starting values; every other key overrides one field. Region
    /// amplitudes not given explicitly are re-derived from the (possibly
    /// overridden) modulus and stress.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let parse_err =
            |line: usize, msg: String| Error::Parse { what: "phantom config", line, msg };
        let mut entries = Vec::new();
        let mut spec = PhantomSpec::preset(Sample::A);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| parse_err(i + 1, format!("expected key = value, got {line:?}")))?;
            let (k, v) = (k.trim(), v.trim());
            if k == "preset" {
                spec = PhantomSpec::preset(v.parse()?);
            } else {
                entries.push((i + 1, k.to_string(), v.to_string()));
            }
        }

        let mut explicit_amplitude = [[false; 2]; 2];
        let mut mechanics_changed = false;
        for (line, k, v) in &entries {
            let num = || -> Result<f64> {
                v.parse::<f64>().map_err(|e| parse_err(*line, format!("{k}: {e}")))
            };
            let count = || -> Result<usize> {
                v.parse::<usize>().map_err(|e| parse_err(*line, format!("{k}: {e}")))
            };
            match k.as_str() {
                "width_px" => spec.width_px = count()?,
                "height_px" => spec.height_px = count()?,
                "field_width_m" => spec.field_width_m = num()?,
                "field_height_m" => spec.field_height_m = num()?,
                "inclusion_center" => {
                    let parts: Vec<_> = v.split(',').map(str::trim).collect();
                    let [x, y] = parts[..] else {
                        return Err(parse_err(*line, "inclusion_center needs two values".into()));
                    };
                    let p = |s: &str| {
                        s.parse::<f64>().map_err(|e| parse_err(*line, format!("{k}: {e}")))
                    };
                    spec.inclusion_center = (p(x)?, p(y)?);
                }
                "inclusion_radius_m" => spec.inclusion_radius_m = num()?,
                "n_frames" => spec.n_frames = count()?,
                "sample_time_s" => spec.sample_time_s = num()?,
                "applied_stress_kpa" => {
                    spec.applied_stress_kpa = num()?;
                    mechanics_changed = true;
                }
                key => {
                    let (region, field) = key
                        .split_once('.')
                        .ok_or_else(|| parse_err(*line, format!("unknown key {key:?}")))?;
                    let idx = match region {
                        "inclusion" => 0,
                        "background" => 1,
                        _ => return Err(parse_err(*line, format!("unknown region {region:?}"))),
                    };
                    let params = if idx == 0 { &mut spec.inclusion } else { &mut spec.background };
                    match field {
                        "young_modulus" => {
                            params.young_modulus = num()?;
                            mechanics_changed = true;
                        }
                        "poisson_ratio" => params.poisson_ratio = num()?,
                        "tau" => params.tau = num()?,
                        "eta" => {
                            params.eta = num()?;
                            explicit_amplitude[idx][0] = true;
                        }
                        "gamma" => {
                            params.gamma = num()?;
                            explicit_amplitude[idx][1] = true;
                        }
                        _ => return Err(parse_err(*line, format!("unknown key {key:?}"))),
                    }
                }
            }
        }

        if mechanics_changed {
            let stress = spec.applied_stress_kpa;
            for (idx, params) in [&mut spec.inclusion, &mut spec.background].into_iter().enumerate() {
                if !explicit_amplitude[idx][0] {
                    params.eta = stress / params.young_modulus;
                }
                if !explicit_amplitude[idx][1] {
                    params.gamma = -0.5 * params.eta;
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// True time constant of every pixel. Hard region boundary.
pub fn tau_map(spec: &PhantomSpec) -> Result<PixelMap<f64>> {
    spec.validate()?;
    let mask = spec.inclusion_mask();
    let data = mask.data.iter().map(|&inside| spec.region(inside).tau).collect();
    Ok(PixelMap::from_vec(spec.height_px, spec.width_px, data))
}

fn synth(spec: &PhantomSpec, kind: StackKind) -> Result<StrainStack> {
    spec.validate()?;
    let mask = spec.inclusion_mask();
    let n_pixels = mask.len();
    let ts = spec.sample_time_s;
    let mut data = vec![0.0; spec.n_frames * n_pixels];
    data.par_chunks_exact_mut(n_pixels).enumerate().for_each(|(i, frame)| {
        let n = i + 1;
        let value = |p: &RegionParams| match kind {
            StackKind::Incremental => p.increment(n, ts),
            StackKind::Cumulative => p.cumulative(n as f64 * ts),
        };
        let (vi, vb) = (value(&spec.inclusion), value(&spec.background));
        for (out, &inside) in frame.iter_mut().zip(&mask.data) {
            *out = if inside { vi } else { vb };
        }
    });
    StrainStack::new(spec.n_frames, spec.height_px, spec.width_px, ts, kind, data)
}

/// Per-interval strain increments; their running sum is a left-Riemann
/// approximation of `s(t) - s(0)`.
pub fn synth_incremental(spec: &PhantomSpec) -> Result<StrainStack> {
    synth(spec, StackKind::Incremental)
}

/// Closed-form cumulative strain `eta + gamma * exp(-n T_s / tau)`.
pub fn synth_cumulative(spec: &PhantomSpec) -> Result<StrainStack> {
    synth(spec, StackKind::Cumulative)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_a() -> PhantomSpec {
        PhantomSpec::preset(Sample::A)
    }

    #[test]
    fn tau_map_center_and_corner() {
        let map = tau_map(&sample_a()).unwrap();
        assert_eq!(*map.get(64, 64), 4.66);
        assert_eq!(*map.get(63, 63), 4.66);
        assert_eq!(*map.get(0, 0), 11.42);
        assert_eq!(*map.get(127, 0), 11.42);
    }

    #[test]
    fn tau_map_has_two_values() {
        let map = tau_map(&sample_a()).unwrap();
        let mut values: Vec<f64> = map.data.clone();
        values.sort_by(f64::total_cmp);
        values.dedup();
        assert_eq!(values, vec![4.66, 11.42]);
    }

    #[test]
    fn degenerate_inclusion_is_uniform_background() {
        let mut spec = sample_a();
        spec.inclusion_radius_m = 0.0;
        let map = tau_map(&spec).unwrap();
        assert!(map.data.iter().all(|&t| t == 11.42));
    }

    #[test]
    fn default_amplitudes_follow_modulus() {
        let spec = sample_a();
        assert!((spec.inclusion.eta - 1.0 / 49.17).abs() < 1e-15);
        assert!((spec.inclusion.eta - 0.0203).abs() < 1e-4);
        assert_eq!(spec.inclusion.gamma, -0.5 * spec.inclusion.eta);
    }

    #[test]
    fn increment_matches_hand_value() {
        let p = RegionParams { young_modulus: 1.0, poisson_ratio: 0.45, tau: 4.66, eta: 0.02, gamma: -0.01 };
        // (0.01 / 4.66) * exp(-0.5 / 4.66) * 0.5, evaluated by hand.
        let hand = 0.002_145_922_746_781_116 * 0.898_259_625_383_692_3 * 0.5;
        assert!((p.increment(1, 0.5) - hand).abs() < 1e-17);
        assert!((p.increment(1, 0.5) - 9.65e-4).abs() < 2e-6);
        assert!(p.increment(10_000, 0.5).abs() < 1e-300);
    }

    #[test]
    fn zero_gamma_gives_zero_increments() {
        let mut spec = sample_a().with_resolution(8, 8);
        spec.inclusion.gamma = 0.0;
        spec.background.gamma = 0.0;
        let inc = synth_incremental(&spec).unwrap();
        assert!(inc.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cumulative_limits() {
        let p = RegionParams { young_modulus: 1.0, poisson_ratio: 0.45, tau: 4.66, eta: 0.02, gamma: -0.01 };
        assert_eq!(p.cumulative(0.0), 0.01);
        assert!((p.cumulative(1e4) - 0.02).abs() < 1e-18);
    }

    #[test]
    fn cumulative_is_monotone_for_negative_gamma() {
        let spec = sample_a().with_resolution(16, 16);
        let cum = synth_cumulative(&spec).unwrap();
        for p in [0, 8 * 16 + 8] {
            let s = cum.pixel_series(p);
            assert!(s.windows(2).all(|w| w[1] >= w[0]));
            assert!(s[0] < s[10]);
        }
    }

    #[test]
    fn running_sum_tracks_closed_form() {
        // Fine-grid oracle: the left-Riemann sum of the rate converges to the
        // closed-form integral as the step shrinks.
        let p = RegionParams { young_modulus: 1.0, poisson_ratio: 0.45, tau: 2.26, eta: 0.02, gamma: -0.01 };
        let err_for = |ts: f64| {
            let n_total = (150.0 / ts).round() as usize;
            let mut sum = p.cumulative(0.0);
            let mut worst: f64 = 0.0;
            for n in 1..=n_total {
                sum += p.increment(n, ts);
                worst = worst.max((sum - p.cumulative(n as f64 * ts)).abs());
            }
            worst
        };
        let coarse = err_for(0.5);
        let fine = err_for(0.005);
        assert!(fine < coarse / 50.0, "coarse {coarse}, fine {fine}");
        // Right-endpoint sum of a decaying rate: the sum is the integral scaled by
        // x / (e^x - 1) with x = T_s / tau, so the gap never exceeds |gamma| times
        // the complement of that factor.
        let x = 0.5f64 / 2.26;
        let bound = p.gamma.abs() * (1.0 - x / (x.exp() - 1.0));
        assert!(coarse <= bound * (1.0 + 1e-9), "coarse {coarse}, bound {bound}");
    }

    #[test]
    fn refining_time_grid_keeps_common_instants() {
        let coarse = sample_a().with_resolution(8, 8);
        let mut fine = coarse.clone();
        fine.n_frames *= 2;
        fine.sample_time_s /= 2.0;
        let c = synth_cumulative(&coarse).unwrap();
        let f = synth_cumulative(&fine).unwrap();
        for n in 0..coarse.n_frames {
            let a = c.frame(n);
            let b = f.frame(2 * n + 1);
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn config_round_trip_and_overrides() {
        let spec = PhantomSpec::preset(Sample::C).with_resolution(32, 24);
        let back = PhantomSpec::from_config_str(&spec.to_config_string()).unwrap();
        assert_eq!(back, spec);

        let spec = PhantomSpec::from_config_str(
            "# tiny phantom\npreset = B\nwidth_px = 16\nheight_px = 16\ninclusion.young_modulus = 50\n",
        )
        .unwrap();
        assert_eq!(spec.inclusion.tau, 2.36);
        assert_eq!(spec.width_px, 16);
        assert!((spec.inclusion.eta - 0.02).abs() < 1e-15);
        assert_eq!(spec.background.eta, 1.0 / 32.78);
    }

    #[test]
    fn config_errors() {
        assert!(PhantomSpec::from_config_str("width_px 3").is_err());
        assert!(PhantomSpec::from_config_str("bogus = 1").is_err());
        assert!(PhantomSpec::from_config_str("inclusion_radius_m = 0.05").is_err());
        assert!(PhantomSpec::from_config_str("n_frames = 2").is_err());
        assert!(PhantomSpec::from_config_str("background.poisson_ratio = 0.5").is_err());
    }
}
