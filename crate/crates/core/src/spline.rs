//! Natural cubic spline interpolation and bad-frame reconstruction.
//!
//! On interval `m` the spline is
//! `s_m(t) = a_m (t - t_m)^3 + b_m (t - t_m)^2 + c_m (t - t_m) + d_m`,
//! with the second derivatives at the knots obtained from the symmetric
//! tridiagonal system of the natural end conditions (`S'' = 0` at both ends).

use rayon::prelude::*;

use crate::degrade::FrameQualityMask;
use crate::error::{Error, Result};
use crate::stack::{frame_times, StrainStack};

/// Forward-elimination factors of a tridiagonal matrix (Thomas algorithm).
///
/// Row `i` reads `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`;
/// `sub[0]` and `sup[n-1]` are ignored.
#[derive(Debug, Clone)]
pub struct TridiagonalFactor {
    sub: Vec<f64>,
    c_prime: Vec<f64>,
    pivot: Vec<f64>,
}

impl TridiagonalFactor {
    /// Returns `None` on a zero (or non-finite) pivot. Diagonally dominant
    /// systems never hit one.
    pub fn new(sub: &[f64], diag: &[f64], sup: &[f64]) -> Option<Self> {
        let n = diag.len();
        assert!(sub.len() == n && sup.len() == n, "tridiagonal bands must have equal length");
        let mut c_prime = vec![0.0; n];
        let mut pivot = vec![0.0; n];
        for i in 0..n {
            let p = if i == 0 { diag[0] } else { diag[i] - sub[i] * c_prime[i - 1] };
            if p == 0.0 || !p.is_finite() {
                return None;
            }
            pivot[i] = p;
            c_prime[i] = if i + 1 < n { sup[i] / p } else { 0.0 };
        }
        Some(Self { sub: sub.to_vec(), c_prime, pivot })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.pivot.len();
        assert_eq!(rhs.len(), n);
        let mut x = vec![0.0; n];
        for i in 0..n {
            let carry = if i == 0 { 0.0 } else { self.sub[i] * x[i - 1] };
            x[i] = (rhs[i] - carry) / self.pivot[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            x[i] -= self.c_prime[i] * x[i + 1];
        }
        x
    }
}

/// Solve a tridiagonal system in O(n). `None` on a zero pivot.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    TridiagonalFactor::new(sub, diag, sup).map(|f| f.solve(rhs))
}

/// Knot abscissae with the natural-spline system already factored, so many
/// ordinate vectors over the same knots cost one O(n) solve each.
#[derive(Debug, Clone)]
pub struct NaturalSplineKnots {
    knots: Vec<f64>,
    widths: Vec<f64>,
    factor: TridiagonalFactor,
}

impl NaturalSplineKnots {
    pub fn new(knots: &[f64]) -> Result<Self> {
        let n = knots.len();
        if n < 4 {
            return Err(Error::InsufficientKnots(n));
        }
        if let Some(i) = knots.iter().position(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite knot at index {i}")));
        }
        if let Some(i) = knots.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::NonMonotonicKnots(i + 1));
        }
        let widths: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        // Unknowns are the interior second derivatives M_1..M_{n-2}.
        let m = n - 2;
        let mut sub = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut sup = vec![0.0; m];
        for k in 0..m {
            sub[k] = widths[k];
            diag[k] = 2.0 * (widths[k] + widths[k + 1]);
            sup[k] = widths[k + 1];
        }
        let factor = TridiagonalFactor::new(&sub, &diag, &sup)
            .expect("natural spline system is strictly diagonally dominant");
        Ok(Self { knots: knots.to_vec(), widths, factor })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn spline(&self, values: &[f64]) -> Result<CubicSpline> {
        let n = self.knots.len();
        if values.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "{} knots but {} values",
                n,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite value at knot {i}")));
        }
        let h = &self.widths;
        let slopes: Vec<f64> = (0..n - 1).map(|i| (values[i + 1] - values[i]) / h[i]).collect();
        let rhs: Vec<f64> = (0..n - 2).map(|k| 6.0 * (slopes[k + 1] - slopes[k])).collect();
        let interior = self.factor.solve(&rhs);

        let mut second = Vec::with_capacity(n);
        second.push(0.0);
        second.extend_from_slice(&interior);
        second.push(0.0);

        let coeffs = (0..n - 1)
            .map(|m| {
                let (m0, m1) = (second[m], second[m + 1]);
                [
                    (m1 - m0) / (6.0 * h[m]),
                    m0 / 2.0,
                    slopes[m] - h[m] * (2.0 * m0 + m1) / 6.0,
                    values[m],
                ]
            })
            .collect();
        Ok(CubicSpline { knots: self.knots.clone(), coeffs, last_value: values[n - 1] })
    }
}

/// Interval whose polynomial evaluates `t`; the boundary intervals extend
/// past the first and last knots.
fn interval_index(knots: &[f64], t: f64) -> usize {
    knots.partition_point(|&k| k <= t).saturating_sub(1).min(knots.len() - 2)
}

/// Pixels handled together by [`reconstruct_stack`]. Each block keeps its
/// working rows contiguous so the shared factorization streams through them.
const PIXEL_BLOCK: usize = 256;

impl NaturalSplineKnots {
    /// Evaluate the splines of many ordinate vectors at once. `rows[k]` holds
    /// the values at knot `k` for every column; `targets` are `(interval,
    /// offset from the interval's left knot)`. Returns one row per target.
    /// The arithmetic matches [`NaturalSplineKnots::spline`] followed by
    /// [`CubicSpline::eval`] operation for operation.
    fn fill_block(&self, rows: &[&[f64]], targets: &[(usize, f64)]) -> Vec<f64> {
        let n = self.knots.len();
        let cols = rows[0].len();
        let h = &self.widths;
        let f = &self.factor;
        let mut slopes = vec![0.0; (n - 1) * cols];
        for k in 0..n - 1 {
            let row = &mut slopes[k * cols..(k + 1) * cols];
            for ((s, &v1), &v0) in row.iter_mut().zip(rows[k + 1]).zip(rows[k]) {
                *s = (v1 - v0) / h[k];
            }
        }
        // Second derivatives, knot-major; the end rows stay zero.
        let mut second = vec![0.0; n * cols];
        for i in 0..n - 2 {
            let (done, rest) = second.split_at_mut((i + 1) * cols);
            let prev = &done[i * cols..];
            let x = &mut rest[..cols];
            let (s0, s1) = (&slopes[i * cols..(i + 1) * cols], &slopes[(i + 1) * cols..(i + 2) * cols]);
            for j in 0..cols {
                let rhs = 6.0 * (s1[j] - s0[j]);
                let carry = if i == 0 { 0.0 } else { f.sub[i] * prev[j] };
                x[j] = (rhs - carry) / f.pivot[i];
            }
        }
        for i in (0..n.saturating_sub(3)).rev() {
            let (head, tail) = second.split_at_mut((i + 2) * cols);
            let x = &mut head[(i + 1) * cols..];
            let next = &tail[..cols];
            for j in 0..cols {
                x[j] -= f.c_prime[i] * next[j];
            }
        }

        let mut out = vec![0.0; targets.len() * cols];
        for (t, &(m, x)) in targets.iter().enumerate() {
            let dst = &mut out[t * cols..(t + 1) * cols];
            let (m0, m1) = (&second[m * cols..(m + 1) * cols], &second[(m + 1) * cols..(m + 2) * cols]);
            let s = &slopes[m * cols..(m + 1) * cols];
            for j in 0..cols {
                let a = (m1[j] - m0[j]) / (6.0 * h[m]);
                let b = m0[j] / 2.0;
                let c = s[j] - h[m] * (2.0 * m0[j] + m1[j]) / 6.0;
                dst[j] = ((a * x + b) * x + c) * x + rows[m][j];
            }
        }
        out
    }
}

/// Piecewise cubic through `N_g` knots. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    knots: Vec<f64>,
    /// `[a, b, c, d]` for each of the `N_g - 1` intervals.
    coeffs: Vec<[f64; 4]>,
    last_value: f64,
}

/// The unique natural cubic spline through `(knots[i], values[i])`.
pub fn build_natural_spline(knots: &[f64], values: &[f64]) -> Result<CubicSpline> {
    if values.len() != knots.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} knots but {} values",
            knots.len(),
            values.len()
        )));
    }
    NaturalSplineKnots::new(knots)?.spline(values)
}

impl CubicSpline {
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn coeffs(&self) -> &[[f64; 4]] {
        &self.coeffs
    }

    fn interval(&self, t: f64) -> usize {
        interval_index(&self.knots, t)
    }

    /// Evaluate `S(t)`. Outside the knot range the boundary interval's cubic
    /// is continued.
    pub fn eval(&self, t: f64) -> f64 {
        if t == self.knots[self.knots.len() - 1] {
            return self.last_value;
        }
        let m = self.interval(t);
        let [a, b, c, d] = self.coeffs[m];
        let x = t - self.knots[m];
        ((a * x + b) * x + c) * x + d
    }

    /// `(S, S', S'')` evaluated with interval `m`'s polynomial.
    pub fn eval_piece(&self, m: usize, t: f64) -> (f64, f64, f64) {
        let [a, b, c, d] = self.coeffs[m];
        let x = t - self.knots[m];
        (
            ((a * x + b) * x + c) * x + d,
            (3.0 * a * x + 2.0 * b) * x + c,
            6.0 * a * x + 2.0 * b,
        )
    }
}

/// Free function form of [`CubicSpline::eval`].
pub fn eval_spline(spline: &CubicSpline, t: f64) -> f64 {
    spline.eval(t)
}

/// Replace every bad frame with the per-pixel natural spline through the good
/// frames. Good frames are copied through untouched.
pub fn reconstruct_stack(stack: &StrainStack, mask: &FrameQualityMask) -> Result<StrainStack> {
    let n_frames = stack.n_frames();
    if mask.len() != n_frames {
        return Err(Error::ShapeMismatch(format!(
            "mask has {} frames, stack has {n_frames}",
            mask.len()
        )));
    }
    let good = mask.good_indices();
    let bad = mask.bad_indices();
    if bad.is_empty() {
        return Ok(stack.clone());
    }
    if good.len() < 4 {
        return Err(Error::InsufficientGoodFrames { good: good.len(), total: n_frames, min: 4 });
    }
    let times = frame_times(n_frames, stack.sample_time_s());
    let knots: Vec<f64> = good.iter().map(|&n| times[n]).collect();
    let system = NaturalSplineKnots::new(&knots)?;

    let targets: Vec<(usize, f64)> = bad
        .iter()
        .map(|&n| {
            let m = interval_index(&knots, times[n]);
            (m, times[n] - knots[m])
        })
        .collect();

    let n_pixels = stack.n_pixels();
    let blocks: Vec<(usize, Vec<f64>)> = (0..n_pixels)
        .into_par_iter()
        .step_by(PIXEL_BLOCK)
        .map(|start| {
            let len = PIXEL_BLOCK.min(n_pixels - start);
            let rows: Vec<&[f64]> =
                good.iter().map(|&n| &stack.data()[n * n_pixels + start..n * n_pixels + start + len]).collect();
            (start, system.fill_block(&rows, &targets))
        })
        .collect();

    let mut out = stack.clone();
    let mut frames: Vec<&mut [f64]> = out.frames_mut().collect();
    for (start, fill) in &blocks {
        let len = fill.len() / bad.len();
        for (i, &n) in bad.iter().enumerate() {
            frames[n][*start..start + len].copy_from_slice(&fill[i * len..(i + 1) * len]);
        }
    }
    Ok(out)
}
