use super::{upper_bound, ProbVector, Regularizer, EPS_MIN, SUM_TOL};
use crate::error::{Error, Result};

const MAX_ITER: usize = 200;

/// Output of the conjugate solver.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateSolution {
    pub policy: ProbVector,
    /// Some coordinate sits on the clamp boundary.
    pub clamped: bool,
    /// Lagrange multiplier of the simplex constraint.
    pub multiplier: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Evaluates `x_a(λ) = clip(f'^{-1}(y_a - λ), ε, u)` and the slope of their sum.
fn evaluate(y: &[f64], reg: &Regularizer, lambda: f64, upper: f64, out: &mut [f64]) -> (f64, f64) {
    let saturation = reg.inverse_domain_max().min(upper);
    let mut sum = 0.0;
    let mut slope = 0.0;
    for (x, &ya) in out.iter_mut().zip(y) {
        let raw = reg.df_inverse_near(ya - lambda, *x);
        let v = raw.clamp(EPS_MIN, upper);
        if raw > EPS_MIN && raw < saturation {
            let h = reg.d2f(v);
            if h.is_finite() && h > 0.0 {
                slope += 1.0 / h;
            }
        }
        *x = v;
        sum += v;
    }
    (sum, slope)
}

const COLLAPSED_TOL: f64 = 1e-9;

/// Maximizes `⟨π, y⟩ − Ω(π)` over the clamped simplex.
///
/// Entries of `y` equal to `-∞` are allowed and pin their coordinate to the
/// lower clamp.
pub(crate) fn solve(y: &[f64], reg: &Regularizer) -> Result<ConjugateSolution> {
    let n = y.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty dual vector".into()));
    }
    if y.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::NonFinite {
            context: "grad_omega_star input",
        });
    }
    let finite: Vec<f64> = y.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return Err(Error::NonFinite {
            context: "grad_omega_star input",
        });
    }
    if n == 1 {
        return Ok(ConjugateSolution {
            policy: ProbVector::new(vec![1.0])?,
            clamped: false,
            multiplier: y[0] - reg.df(1.0),
            iterations: 0,
            residual: 0.0,
        });
    }
    let upper = upper_bound(n);
    let m = finite.len() as f64;
    let y_max = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let y_min = finite.iter().copied().fold(f64::INFINITY, f64::min);
    // At lo every finite coordinate is at least 1/m, so the sum is at least 1;
    // at hi every coordinate is at most 1/n, so the sum is at most 1.
    let mut lo = y_min - reg.df(1.0 / m);
    let mut hi = y_max - reg.df(1.0 / n as f64);
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }

    let mut x = vec![0.0; n];
    let mut lambda = 0.5 * (lo + hi);
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    let mut best: Option<(f64, f64)> = None;
    let mut collapsed = false;
    while iterations < MAX_ITER {
        iterations += 1;
        let (sum, slope) = evaluate(y, reg, lambda, upper, &mut x);
        residual = sum - 1.0;
        if best.is_none_or(|(r, _)| residual.abs() < r) {
            best = Some((residual.abs(), lambda));
        }
        if residual.abs() <= 1e-15 * n as f64 {
            break;
        }
        if residual > 0.0 {
            lo = lambda;
        } else {
            hi = lambda;
        }
        let mut next = if slope > 0.0 {
            lambda + residual / slope
        } else {
            f64::NAN
        };
        if !(next > lo && next < hi) || next == lambda {
            next = 0.5 * (lo + hi);
        }
        if next == lambda || hi - lo <= 2.0 * f64::EPSILON * lambda.abs().max(1.0) {
            collapsed = true;
            break;
        }
        lambda = next;
    }
    if let Some((r, l)) = best {
        if r < residual.abs() {
            lambda = l;
            let (sum, _) = evaluate(y, reg, lambda, upper, &mut x);
            residual = sum - 1.0;
        }
    }
    // A collapsed bracket means λ is exact to machine precision and what
    // remains comes from inverting a flat ∇Ω near the clamp.
    let tol = if collapsed { COLLAPSED_TOL } else { SUM_TOL };
    if residual.abs() > tol {
        return Err(Error::SolverNonConvergence {
            iterations,
            residual: residual.abs(),
        });
    }
    if let Some(limit) = reg.convex_limit() {
        if let Some(&v) = x.iter().find(|&&v| v >= limit) {
            return Err(Error::NonConvexRegion { value: v, limit });
        }
    }
    // distribute the leftover rounding onto the largest free coordinate
    let total: f64 = x.iter().sum();
    if total != 1.0 {
        if let Some((i, _)) = x
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > EPS_MIN && **v < upper)
            .max_by(|a, b| a.1.total_cmp(b.1))
        {
            let adjusted = x[i] + (1.0 - total);
            if adjusted > EPS_MIN && adjusted < upper {
                x[i] = adjusted;
            }
        }
    }
    let clamped = x.iter().any(|&v| v <= EPS_MIN || v >= upper);
    Ok(ConjugateSolution {
        policy: ProbVector::new(x)?,
        clamped,
        multiplier: lambda,
        iterations,
        residual: residual.abs(),
    })
}

/// Bregman projection of `x` onto the clamped simplex: the minimizer of
/// `D_Ω(· ‖ x)` over feasible points.
///
/// Coordinates at or below zero use a monotone continuation of `∇Ω`.
pub fn bregman_project(x: &[f64], reg: &Regularizer) -> Result<ProbVector> {
    if x.is_empty() {
        return Err(Error::InvalidArgument("empty vector".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "bregman_project input",
        });
    }
    let sum: f64 = x.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized { sum });
    }
    if let Ok(p) = ProbVector::new(x.to_vec()) {
        return Ok(p);
    }
    let y: Vec<f64> = x.iter().map(|&v| reg.df_extended(v)).collect();
    Ok(solve(&y, reg)?.policy)
}
