//! Levenberg-Marquardt fitting of the creep model
//! `s(t) = eta + gamma * exp(-t / tau)` to cumulative strain curves.
//!
//! The time constant is fitted directly and clamped to
//! `[tau_floor, tau_ceiling]`. Damping is Marquardt's: the normal-equation
//! diagonal scaled by `(1 + lambda)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::map::PixelMap;
use crate::stack::{StackKind, StrainStack};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LMConfig {
    pub max_iterations: usize,
    pub initial_damping: f64,
    pub damping_up: f64,
    pub damping_down: f64,
    pub rel_tolerance: f64,
    /// Defaults to a tenth of the sample spacing.
    pub tau_floor: Option<f64>,
    /// Defaults to 100 x the last sample time.
    pub tau_ceiling: Option<f64>,
}

impl Default for LMConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            initial_damping: 1e-3,
            damping_up: 10.0,
            damping_down: 10.0,
            rel_tolerance: 1e-10,
            tau_floor: None,
            tau_ceiling: None,
        }
    }
}

impl LMConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be positive".into()));
        }
        positive("initial_damping", self.initial_damping)?;
        positive("damping_up", self.damping_up)?;
        positive("damping_down", self.damping_down)?;
        positive("rel_tolerance", self.rel_tolerance)?;
        if let Some(f) = self.tau_floor {
            positive("tau_floor", f)?;
        }
        if let Some(c) = self.tau_ceiling {
            positive("tau_ceiling", c)?;
        }
        if let (Some(f), Some(c)) = (self.tau_floor, self.tau_ceiling) {
            if f >= c {
                return Err(Error::InvalidParameter("tau_floor must be below tau_ceiling".into()));
            }
        }
        Ok(())
    }

    /// `(floor, ceiling)` for the given sample times.
    pub fn tau_bounds(&self, times: &[f64]) -> (f64, f64) {
        let spacing = times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        let floor = self.tau_floor.unwrap_or(spacing / 10.0);
        let ceiling = self.tau_ceiling.unwrap_or(100.0 * times[times.len() - 1].abs());
        (floor, ceiling.max(floor * 10.0))
    }
}

/// Why a fit stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Exact fit, zero residual.
    ZeroResidual,
    /// Relative cost reduction of an accepted step fell below tolerance.
    CostReduction,
    /// Scaled gradient fell below tolerance.
    Gradient,
    /// No step larger than tolerance reduces the cost.
    StepSize,
    MaxIterations,
    /// Converged with `tau` pinned to a clamp bound; not a usable estimate.
    AtBound,
    /// Constant data; `tau` is undefined.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpFit {
    pub eta: f64,
    pub gamma: f64,
    pub tau: f64,
    /// Euclidean norm of the final residual vector.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
}

impl ExpFit {
    pub fn eval(&self, t: f64) -> f64 {
        model(t, self.eta, self.gamma, self.tau)
    }
}

#[inline]
pub fn model(t: f64, eta: f64, gamma: f64, tau: f64) -> f64 {
    eta + gamma * (-t / tau).exp()
}

/// Partial derivatives of the model with respect to `(eta, gamma, tau)`.
#[inline]
pub fn model_jacobian(t: f64, gamma: f64, tau: f64) -> [f64; 3] {
    let e = (-t / tau).exp();
    [1.0, e, gamma * t / (tau * tau) * e]
}

/// Starting point from the curve shape: `eta` from the tail mean, `gamma` from
/// the first sample, `tau` from the first 1/e crossing of the transient.
pub fn initial_guess(times: &[f64], values: &[f64]) -> (f64, f64, f64) {
    let n = values.len();
    let tail = n.div_ceil(10).max(1);
    let eta = values[n - tail..].iter().sum::<f64>() / tail as f64;
    let gamma = values[0] - eta;
    let duration = times[n - 1] - times[0];
    let fallback = duration / 3.0;
    if gamma == 0.0 {
        return (eta, gamma, fallback);
    }
    let threshold = gamma.abs() / std::f64::consts::E;
    let tau = values
        .iter()
        .zip(times)
        .find(|(v, _)| (*v - eta).abs() <= threshold)
        .map(|(_, t)| t - times[0])
        .filter(|&t| t > 0.0)
        .unwrap_or(fallback);
    (eta, gamma, tau)
}

fn check_samples(times: &[f64], values: &[f64]) -> Result<()> {
    if times.len() != values.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} times but {} values",
            times.len(),
            values.len()
        )));
    }
    if times.len() < 4 {
        return Err(Error::InvalidParameter(format!("need at least 4 samples, got {}", times.len())));
    }
    if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::NonMonotonicKnots(i + 1));
    }
    if values.iter().chain(times).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("samples must be finite".into()));
    }
    Ok(())
}

struct Problem<'a> {
    times: &'a [f64],
    values: &'a [f64],
}

impl Problem<'_> {
    /// Sum of squared residuals and the `exp(-t/tau)` column, or `None` if
    /// the evaluation overflowed.
    fn cost(&self, p: &[f64; 3], exps: &mut Vec<f64>) -> Option<f64> {
        exps.clear();
        let mut cost = 0.0;
        for (&t, &y) in self.times.iter().zip(self.values) {
            let e = (-t / p[2]).exp();
            exps.push(e);
            let r = y - (p[0] + p[1] * e);
            cost += r * r;
        }
        cost.is_finite().then_some(cost)
    }

    /// `J^T J` and `J^T r` at `p` given its exponential column.
    fn normal_equations(&self, p: &[f64; 3], exps: &[f64]) -> ([[f64; 3]; 3], [f64; 3]) {
        let mut a = [[0.0; 3]; 3];
        let mut g = [0.0; 3];
        let inv_tau2 = 1.0 / (p[2] * p[2]);
        for ((&t, &y), &e) in self.times.iter().zip(self.values).zip(exps) {
            let j = [1.0, e, p[1] * t * inv_tau2 * e];
            let r = y - (p[0] + p[1] * e);
            for row in 0..3 {
                g[row] += j[row] * r;
                for col in row..3 {
                    a[row][col] += j[row] * j[col];
                }
            }
        }
        a[1][0] = a[0][1];
        a[2][0] = a[0][2];
        a[2][1] = a[1][2];
        (a, g)
    }
}

/// Cholesky solve of a 3x3 symmetric positive definite system.
fn solve_spd3(m: &[[f64; 3]; 3], b: &[f64; 3]) -> Option<[f64; 3]> {
    let mut l = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let mut s = m[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut z = [0.0; 3];
    for i in 0..3 {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i][k] * z[k];
        }
        z[i] = s / l[i][i];
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let mut s = z[i];
        for k in i + 1..3 {
            s -= l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Fit from the automatic [`initial_guess`].
pub fn fit_exponential(times: &[f64], values: &[f64], config: &LMConfig) -> Result<ExpFit> {
    check_samples(times, values)?;
    let start = initial_guess(times, values);
    fit_exponential_from(times, values, start, config)
}

/// Fit from an explicit starting point `(eta, gamma, tau)`.
pub fn fit_exponential_from(
    times: &[f64],
    values: &[f64],
    start: (f64, f64, f64),
    config: &LMConfig,
) -> Result<ExpFit> {
    check_samples(times, values)?;
    config.validate()?;

    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let magnitude = lo.abs().max(hi.abs());
    if hi - lo <= 4.0 * f64::EPSILON * magnitude {
        return Ok(ExpFit {
            eta: values[0],
            gamma: 0.0,
            tau: f64::NAN,
            residual_norm: 0.0,
            iterations: 0,
            converged: false,
            termination: Termination::Degenerate,
        });
    }

    let (tau_lo, tau_hi) = config.tau_bounds(times);
    let tol = config.rel_tolerance;
    let problem = Problem { times, values };
    let mut p = [start.0, start.1, start.2.clamp(tau_lo, tau_hi)];
    let mut exps = Vec::with_capacity(times.len());
    let mut trial_exps = Vec::with_capacity(times.len());
    let mut cost = problem
        .cost(&p, &mut exps)
        .ok_or_else(|| Error::InvalidParameter("model overflow at the starting point".into()))?;

    let mut lambda = config.initial_damping;
    let mut iterations = 0;
    let mut termination = Termination::MaxIterations;
    let mut normal = None;

    if cost == 0.0 {
        termination = Termination::ZeroResidual;
    } else {
        while iterations < config.max_iterations {
            let (a, g) = match normal {
                Some(ng) => ng,
                None => {
                    let (a, g) = problem.normal_equations(&p, &exps);
                    let rnorm = cost.sqrt();
                    let scaled = (0..3)
                        .map(|j| if a[j][j] > 0.0 { g[j].abs() / (a[j][j].sqrt() * rnorm) } else { 0.0 })
                        .fold(0.0, f64::max);
                    if scaled < tol {
                        termination = Termination::Gradient;
                        break;
                    }
                    normal = Some((a, g));
                    (a, g)
                }
            };
            iterations += 1;

            let diag_floor = 1e-12 * a[0][0].max(a[1][1]).max(a[2][2]);
            let mut damped = a;
            for j in 0..3 {
                damped[j][j] += lambda * a[j][j].max(diag_floor);
            }
            let Some(step) = solve_spd3(&damped, &g) else {
                lambda *= config.damping_up;
                continue;
            };
            let trial = [p[0] + step[0], p[1] + step[1], (p[2] + step[2]).clamp(tau_lo, tau_hi)];
            match problem.cost(&trial, &mut trial_exps) {
                Some(trial_cost) if trial_cost < cost => {
                    let reduction = (cost - trial_cost) / cost;
                    debug_assert!(trial_cost <= cost);
                    p = trial;
                    cost = trial_cost;
                    std::mem::swap(&mut exps, &mut trial_exps);
                    normal = None;
                    lambda /= config.damping_down;
                    if cost == 0.0 {
                        termination = Termination::ZeroResidual;
                        break;
                    }
                    if reduction < tol {
                        termination = Termination::CostReduction;
                        break;
                    }
                }
                _ => {
                    lambda *= config.damping_up;
                    let small = |d: f64, v: f64, scale: f64| d.abs() <= tol * (v.abs() + scale);
                    if small(trial[0] - p[0], p[0], magnitude)
                        && small(trial[1] - p[1], p[1], magnitude)
                        && small(trial[2] - p[2], p[2], 0.0)
                    {
                        termination = Termination::StepSize;
                        break;
                    }
                }
            }
        }
    }

    let mut converged = termination != Termination::MaxIterations;
    let span = tau_hi - tau_lo;
    if converged && (p[2] <= tau_lo + 1e-12 * span || p[2] >= tau_hi - 1e-12 * span) {
        converged = false;
        termination = Termination::AtBound;
    }
    Ok(ExpFit {
        eta: p[0],
        gamma: p[1],
        tau: p[2],
        residual_norm: cost.sqrt(),
        iterations,
        converged,
        termination,
    })
}

/// Estimated time-constant image.
#[derive(Debug, Clone, PartialEq)]
pub struct TCImage {
    /// Fitted tau; NaN where the data were degenerate.
    pub tau_map: PixelMap<f64>,
    pub converged_mask: PixelMap<bool>,
    pub truth_map: Option<PixelMap<f64>>,
}

impl TCImage {
    pub fn coverage(&self) -> f64 {
        let n = self.converged_mask.data.iter().filter(|&&c| c).count();
        n as f64 / self.converged_mask.len() as f64
    }
}

/// Fit every pixel of a cumulative stack.
pub fn fit_stack(stack: &StrainStack, config: &LMConfig, truth: Option<&PixelMap<f64>>) -> Result<TCImage> {
    stack.require_kind(StackKind::Cumulative)?;
    config.validate()?;
    if let Some(t) = truth {
        if t.height != stack.height() || t.width != stack.width() {
            return Err(Error::ShapeMismatch(format!(
                "truth map is {}x{}, stack is {}x{}",
                t.height,
                t.width,
                stack.height(),
                stack.width()
            )));
        }
    }
    let times = stack.times();
    let fits: Vec<ExpFit> = (0..stack.n_pixels())
        .into_par_iter()
        .map(|p| fit_exponential(&times, &stack.pixel_series(p), config))
        .collect::<Result<_>>()?;
    let (h, w) = (stack.height(), stack.width());
    Ok(TCImage {
        tau_map: PixelMap::from_vec(h, w, fits.iter().map(|f| f.tau).collect()),
        converged_mask: PixelMap::from_vec(h, w, fits.iter().map(|f| f.converged).collect()),
        truth_map: truth.cloned(),
    })
}

/// Running sum along the frame axis.
pub fn cumulate(stack: &StrainStack) -> Result<StrainStack> {
    stack.require_kind(StackKind::Incremental)?;
    let mut out = stack.clone().with_kind(StackKind::Cumulative);
    let mut acc = vec![0.0; stack.n_pixels()];
    for frame in out.frames_mut() {
        for (a, v) in acc.iter_mut().zip(frame.iter_mut()) {
            *a += *v;
            *v = *a;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        (1..=300).map(|n| 0.5 * n as f64).collect()
    }

    fn curve(times: &[f64], eta: f64, gamma: f64, tau: f64) -> Vec<f64> {
        times.iter().map(|&t| model(t, eta, gamma, tau)).collect()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn recovers_clean_parameters() {
        let t = grid();
        let fit = fit_exponential(&t, &curve(&t, 0.02, -0.01, 4.66), &LMConfig::default()).unwrap();
        assert!(fit.converged, "{fit:?}");
        assert!(rel(fit.eta, 0.02) < 1e-6);
        assert!(rel(fit.gamma, -0.01) < 1e-6);
        assert!(rel(fit.tau, 4.66) < 1e-6);
        assert!(fit.residual_norm >= 0.0);
    }

    #[test]
    fn constant_curve_is_degenerate() {
        let t = grid();
        let fit = fit_exponential(&t, &vec![0.02; 300], &LMConfig::default()).unwrap();
        assert_eq!(fit.eta, 0.02);
        assert_eq!(fit.gamma, 0.0);
        assert!(!fit.converged);
        assert_eq!(fit.termination, Termination::Degenerate);
    }

    #[test]
    fn initial_guess_on_clean_curve() {
        let t = grid();
        let (eta, gamma, tau) = initial_guess(&t, &curve(&t, 0.02, -0.01, 4.66));
        assert!(tau > 4.66 / 2.0 && tau < 4.66 * 2.0, "{tau}");
        assert!((eta - 0.02).abs() < 1e-12);
        assert!(gamma < 0.0);
        let (_, g0, tau0) = initial_guess(&t, &vec![0.5; 300]);
        assert_eq!(g0, 0.0);
        assert_eq!(tau0, (150.0 - 0.5) / 3.0);
    }

    #[test]
    fn rejects_bad_samples() {
        let cfg = LMConfig::default();
        assert!(fit_exponential(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], &cfg).is_err());
        assert!(fit_exponential(&[1.0, 2.0, 2.0, 3.0], &[1.0; 4], &cfg).is_err());
        assert!(fit_exponential(&[1.0, 2.0, 3.0, 4.0], &[1.0; 3], &cfg).is_err());
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let (eta, gamma, tau) = (0.013, -0.007, 3.1);
        for &t in &[0.5, 2.0, 7.5, 40.0] {
            let j = model_jacobian(t, gamma, tau);
            let params = [eta, gamma, tau];
            for k in 0..3 {
                let h = 1e-6 * params[k].abs();
                let mut up = params;
                let mut dn = params;
                up[k] += h;
                dn[k] -= h;
                // eta cancels exactly in the gamma and tau differences; leave it
                // out so the quotient is not swamped by its rounding.
                let f = |p: [f64; 3]| if k == 0 { model(t, p[0], p[1], p[2]) } else { model(t, 0.0, p[1], p[2]) };
                let fd = (f(up) - f(dn)) / (2.0 * h);
                assert!((fd - j[k]).abs() <= 1e-5 * j[k].abs(), "t={t} k={k}: {fd} vs {}", j[k]);
            }
        }
    }

    #[test]
    fn tau_is_clamped_and_flagged() {
        // A straight line drives tau toward infinity.
        let t = grid();
        let line: Vec<f64> = t.iter().map(|&x| 1e-3 * x).collect();
        let fit = fit_exponential(&t, &line, &LMConfig::default()).unwrap();
        let (_, hi) = LMConfig::default().tau_bounds(&t);
        assert!(fit.tau <= hi);
        assert!(!fit.converged);
    }

    #[test]
    fn cumulate_basics() {
        let inc = StrainStack::new(3, 1, 2, 0.5, StackKind::Incremental, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
            .unwrap();
        let cum = cumulate(&inc).unwrap();
        assert_eq!(cum.data(), &[1.0, 2.0, 4.0, 6.0, 9.0, 12.0]);
        assert_eq!(cum.kind(), StackKind::Cumulative);
        assert!(cumulate(&cum).is_err());

        let one = StrainStack::new(1, 1, 2, 0.5, StackKind::Incremental, vec![1.5, -2.0]).unwrap();
        assert_eq!(cumulate(&one).unwrap().data(), one.data());
        let zero = StrainStack::new(4, 2, 2, 0.5, StackKind::Incremental, vec![0.0; 16]).unwrap();
        assert!(cumulate(&zero).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn config_validation() {
        assert!(LMConfig { tau_floor: Some(2.0), tau_ceiling: Some(1.0), ..LMConfig::default() }
            .validate()
            .is_err());
        assert!(LMConfig { max_iterations: 0, ..LMConfig::default() }.validate().is_err());
        assert!(LMConfig { rel_tolerance: -1.0, ..LMConfig::default() }.validate().is_err());
    }
}
