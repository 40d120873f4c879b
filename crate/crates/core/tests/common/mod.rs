//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Natural cubic spline coefficients `[a, b, c, d]` per interval (local form
/// `a x^3 + b x^2 + c x + d`, `x = t - knots[i]`), found by solving all
/// `4(n - 1)` interpolation, continuity and end conditions as one dense
/// system with LU decomposition.
pub fn dense_natural_spline(knots: &[f64], values: &[f64]) -> Vec<[f64; 4]> {
    let n = knots.len();
    let m = n - 1;
    let size = 4 * m;
    let mut a = DMatrix::<f64>::zeros(size, size);
    let mut rhs = DVector::<f64>::zeros(size);
    // Unknown layout: interval i owns columns 4i..4i+4 = (a, b, c, d).
    let col = |i: usize, k: usize| 4 * i + k;
    let mut row = 0;
    for i in 0..m {
        let h = knots[i + 1] - knots[i];
        // S_i(x_i) = y_i
        a[(row, col(i, 3))] = 1.0;
        rhs[row] = values[i];
        row += 1;
        // S_i(x_{i+1}) = y_{i+1}
        a[(row, col(i, 0))] = h * h * h;
        a[(row, col(i, 1))] = h * h;
        a[(row, col(i, 2))] = h;
        a[(row, col(i, 3))] = 1.0;
        rhs[row] = values[i + 1];
        row += 1;
    }
    for i in 0..m - 1 {
        let h = knots[i + 1] - knots[i];
        // S_i'(x_{i+1}) - S_{i+1}'(x_{i+1}) = 0
        a[(row, col(i, 0))] = 3.0 * h * h;
        a[(row, col(i, 1))] = 2.0 * h;
        a[(row, col(i, 2))] = 1.0;
        a[(row, col(i + 1, 2))] = -1.0;
        row += 1;
        // S_i''(x_{i+1}) - S_{i+1}''(x_{i+1}) = 0
        a[(row, col(i, 0))] = 6.0 * h;
        a[(row, col(i, 1))] = 2.0;
        a[(row, col(i + 1, 1))] = -2.0;
        row += 1;
    }
    // Natural ends.
    a[(row, col(0, 1))] = 2.0;
    row += 1;
    let h = knots[m] - knots[m - 1];
    a[(row, col(m - 1, 0))] = 6.0 * h;
    a[(row, col(m - 1, 1))] = 2.0;
    row += 1;
    assert_eq!(row, size);

    let x = a.lu().solve(&rhs).expect("natural spline system is non-singular");
    (0..m).map(|i| [x[col(i, 0)], x[col(i, 1)], x[col(i, 2)], x[col(i, 3)]]).collect()
}

/// Random strictly increasing knots with spacings in `[0.1, 2.0)` and values
/// in `[-1, 1)`.
pub fn random_instance(rng: &mut impl Rng, len: usize) -> (Vec<f64>, Vec<f64>) {
    let mut t = rng.random_range(-5.0..5.0);
    let knots = (0..len)
        .map(|_| {
            let k = t;
            t += rng.random_range(0.1..2.0);
            k
        })
        .collect();
    let values = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
    (knots, values)
}

/// Largest coefficient mismatch between two spline coefficient sets, each
/// power normalised by the largest magnitude of that power in the oracle.
pub fn max_coefficient_error(got: &[[f64; 4]], oracle: &[[f64; 4]]) -> f64 {
    assert_eq!(got.len(), oracle.len());
    let mut worst = 0.0f64;
    for k in 0..4 {
        let scale = oracle.iter().map(|c| c[k].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        for (g, o) in got.iter().zip(oracle) {
            worst = worst.max((g[k] - o[k]).abs() / scale);
        }
    }
    worst
}

/// Outcome of a spline-oracle comparison run.
pub struct SplineOracleReport {
    pub instances: usize,
    pub worst_coefficient_error: f64,
    pub worst_knot_error: f64,
    pub worst_linear_error: f64,
}

/// Compare the library spline with the dense oracle on `instances` random
/// problems of length 4..=50, and check knot interpolation and linear
/// reproduction on each.
pub fn run_spline_oracle(instances: usize, seed: u64) -> SplineOracleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SplineOracleReport {
        instances,
        worst_coefficient_error: 0.0,
        worst_knot_error: 0.0,
        worst_linear_error: 0.0,
    };
    for _ in 0..instances {
        let len = rng.random_range(4..=50);
        let (knots, values) = random_instance(&mut rng, len);
        let spline = strain_tc::spline::build_natural_spline(&knots, &values).unwrap();
        let oracle = dense_natural_spline(&knots, &values);
        report.worst_coefficient_error =
            report.worst_coefficient_error.max(max_coefficient_error(spline.coeffs(), &oracle));
        for (&t, &v) in knots.iter().zip(&values) {
            report.worst_knot_error = report.worst_knot_error.max((spline.eval(t) - v).abs());
        }

        let (slope, offset) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let line: Vec<f64> = knots.iter().map(|t| slope * t + offset).collect();
        let spline = strain_tc::spline::build_natural_spline(&knots, &line).unwrap();
        let (lo, hi) = (knots[0], knots[len - 1]);
        for j in 0..=40 {
            let t = lo - 1.0 + (hi - lo + 2.0) * j as f64 / 40.0;
            let exact = slope * t + offset;
            let err = (spline.eval(t) - exact).abs() / exact.abs().max(1.0);
            report.worst_linear_error = report.worst_linear_error.max(err);
        }
    }
    report
}

/// Central finite difference of the creep model with respect to parameter
/// `k` (0 = eta, 1 = gamma, 2 = tau) using relative step `rel_step`.
/// Eta is omitted from the evaluation of the gamma and tau partials: it is
/// an additive constant whose cancellation would only add rounding noise.
pub fn model_central_difference(t: f64, params: [f64; 3], k: usize, rel_step: f64) -> f64 {
    let f = |p: [f64; 3]| {
        let eta = if k == 0 { p[0] } else { 0.0 };
        eta + p[1] * (-t / p[2]).exp()
    };
    let step = rel_step * params[k].abs().max(1e-300);
    let (mut up, mut down) = (params, params);
    up[k] += step;
    down[k] -= step;
    (f(up) - f(down)) / (2.0 * step)
}

/// Worst relative mismatch between the analytic Jacobian and central
/// differences over `points` random parameter sets, each checked at several
/// times.
pub fn run_jacobian_check(points: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..points {
        let eta = rng.random_range(-0.1..0.1);
        let gamma = rng.random_range(0.001..0.1) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let tau = rng.random_range(0.5..50.0);
        for t in [0.5, 0.25 * tau, tau, 3.0 * tau] {
            let analytic = strain_tc::fit::model_jacobian(t, gamma, tau);
            for k in 0..3 {
                let fd = model_central_difference(t, [eta, gamma, tau], k, 1e-6);
                let err = (analytic[k] - fd).abs() / analytic[k].abs().max(f64::MIN_POSITIVE);
                worst = worst.max(err);
            }
        }
    }
    worst
}
