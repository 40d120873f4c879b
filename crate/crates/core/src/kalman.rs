//! Fixed-lag Kalman smoother used as the denoising baseline.
//!
//! Each pixel's incremental strain curve is modelled as a scalar random walk
//! observed in white noise:
//!
//! ```text
//! x_k = x_{k-1} + w_k,   w_k ~ N(0, Q)
//! y_k = x_k + v_k,       v_k ~ N(0, R)
//! ```
//!
//! The forward pass is the standard predict/update filter. The estimate for
//! sample `n` is then refined with the measurements up to `n + lag` by a
//! Rauch-Tung-Striebel sweep over that window, which is exactly the fixed-lag
//! smoothed estimate `x_{n | n + lag}`.

use crate::error::{Error, Result};
use crate::stack::{StackKind, StrainStack};

/// Ratio between the default process noise and the measurement noise.
///
/// Strain increments decay within a handful of frames for the shorter time
/// constants, so a heavily smoothing random walk (Q << R) lags the decay and
/// inflates the fitted time constant several-fold. Q = R keeps the steady-state
/// gain near 0.6, which denoises without that bias.
pub const DEFAULT_PROCESS_RATIO: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasurementNoise {
    /// Estimated per pixel from the first differences of the input.
    Auto,
    Explicit(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanSpec {
    /// Samples in the smoothing window, current sample included
    /// (lag = `window_len - 1`).
    pub window_len: usize,
    /// `None` means `DEFAULT_PROCESS_RATIO * R`.
    pub process_noise_var: Option<f64>,
    pub measurement_noise_var: MeasurementNoise,
}

impl Default for KalmanSpec {
    fn default() -> Self {
        Self { window_len: 13, process_noise_var: None, measurement_noise_var: MeasurementNoise::Auto }
    }
}

impl KalmanSpec {
    pub fn validate(&self) -> Result<()> {
        if self.window_len == 0 {
            return Err(Error::InvalidParameter("window_len must be >= 1".into()));
        }
        if let Some(q) = self.process_noise_var {
            if !(q.is_finite() && q > 0.0) {
                return Err(Error::InvalidParameter(format!("process noise variance must be > 0, got {q}")));
            }
        }
        if let MeasurementNoise::Explicit(r) = self.measurement_noise_var {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "measurement noise variance must be > 0, got {r}"
                )));
            }
        }
        Ok(())
    }

    pub fn lag(&self) -> usize {
        self.window_len - 1
    }

    /// Resolve `(Q, R)` for one series.
    pub fn variances(&self, series: &[f64]) -> (f64, f64) {
        let r = match self.measurement_noise_var {
            MeasurementNoise::Explicit(r) => r,
            MeasurementNoise::Auto => auto_measurement_variance(series),
        };
        let q = self.process_noise_var.unwrap_or(DEFAULT_PROCESS_RATIO * r);
        (q, r)
    }
}

/// `var(diff(y)) / 2`, the white-noise variance implied by first differences.
/// Floored so a perfectly smooth or constant series still gets a usable filter.
pub fn auto_measurement_variance(series: &[f64]) -> f64 {
    let floor = {
        let ms = series.iter().map(|v| v * v).sum::<f64>() / series.len().max(1) as f64;
        (ms * f64::EPSILON).max(f64::MIN_POSITIVE)
    };
    if series.len() < 3 {
        return floor;
    }
    let diffs: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64;
    (var / 2.0).max(floor)
}

/// Causal filtered means and variances `x_{k|k}`, `P_{k|k}`.
///
/// Prior: state equals the first sample with variance `R`.
pub fn kalman_filter(series: &[f64], q: f64, r: f64) -> (Vec<f64>, Vec<f64>) {
    let n = series.len();
    let mut mean = Vec::with_capacity(n);
    let mut var = Vec::with_capacity(n);
    let Some(&first) = series.first() else {
        return (mean, var);
    };
    let (mut x, mut p) = (first, r);
    for (k, &y) in series.iter().enumerate() {
        if k > 0 {
            p += q;
        }
        let gain = p / (p + r);
        x += gain * (y - x);
        p *= 1.0 - gain;
        mean.push(x);
        var.push(p);
    }
    (mean, var)
}

/// Fixed-lag smoothed series `x_{n | min(n + lag, N - 1)}`.
pub fn fixed_lag_smooth(series: &[f64], q: f64, r: f64, lag: usize) -> Vec<f64> {
    let (mean, var) = kalman_filter(series, q, r);
    let n = series.len();
    if lag == 0 {
        return mean;
    }
    // RTS gains C_k = P_{k|k} / P_{k+1|k} do not depend on the window end.
    let gains: Vec<f64> = var.iter().map(|&p| p / (p + q)).collect();
    (0..n)
        .map(|k| {
            let end = (k + lag).min(n - 1);
            let mut s = mean[end];
            for j in (k..end).rev() {
                s = mean[j] + gains[j] * (s - mean[j]);
            }
            s
        })
        .collect()
}

/// Denoise every pixel's temporal curve.
pub fn kalman_denoise(stack: &StrainStack, spec: &KalmanSpec) -> Result<StrainStack> {
    spec.validate()?;
    let lag = spec.lag();
    stack.map_pixel_series(stack.kind(), |_, series| {
        let (q, r) = spec.variances(series);
        Ok(fixed_lag_smooth(series, q, r, lag))
    })
}

/// Convenience for incremental input, the usual case.
pub fn kalman_denoise_incremental(stack: &StrainStack, spec: &KalmanSpec) -> Result<StrainStack> {
    stack.require_kind(StackKind::Incremental)?;
    kalman_denoise(stack, spec)
}
