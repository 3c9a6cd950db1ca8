use nalgebra::{DMatrix, DVector};

use super::family::{
    bregman_div_gaussian, from_natural, interaction_integral, log_power_integral, natural_params, GaussianPolicyParams,
};
use super::ldl::{clip_log_sigma, lower_index, SIGMA_MAX, SIGMA_MIN};
use crate::bregman::Regularizer;
use crate::error::{Error, Result};

const MAX_ITER: usize = 500;
const GRAD_TOL: f64 = 1e-6;

/// One mirror-descent step toward `target`:
/// the minimizer of `η D(π ‖ target) + (1−η) D(π ‖ current)`.
///
/// Shannon steps interpolate natural parameters exactly. Tsallis steps run
/// projected gradient descent over `[μ; ln σ; lower]`.
pub fn md_update_gaussian(
    current: &GaussianPolicyParams,
    target: &GaussianPolicyParams,
    eta: f64,
    reg: &Regularizer,
) -> Result<GaussianPolicyParams> {
    if current.dim() != target.dim() {
        return Err(Error::LengthMismatch {
            expected: current.dim(),
            got: target.dim(),
        });
    }
    if !eta.is_finite() || eta < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "step size must be finite and nonnegative, got {eta}"
        )));
    }
    match *reg {
        Regularizer::Shannon => shannon_step(current, target, eta),
        Regularizer::Tsallis { q, k } => tsallis_step(current, target, eta, q, k).map(|r| r.params),
        other => Err(Error::InvalidArgument(format!(
            "no Gaussian step for the {} regularizer",
            other.name()
        ))),
    }
}

fn shannon_step(
    current: &GaussianPolicyParams,
    target: &GaussianPolicyParams,
    eta: f64,
) -> Result<GaussianPolicyParams> {
    let theta = natural_params(current).combine(1.0 - eta, &natural_params(target), eta);
    from_natural(&theta)
}

/// Result of the Tsallis proximal solve.
#[derive(Debug, Clone)]
pub struct TsallisStep {
    pub params: GaussianPolicyParams,
    pub objective: f64,
    pub iterations: usize,
    pub grad_norm: f64,
}

/// Objective of the proximal step and its gradient in flat coordinates.
pub fn step_objective(
    x: &GaussianPolicyParams,
    current: &GaussianPolicyParams,
    target: &GaussianPolicyParams,
    eta: f64,
    q: f64,
    k: f64,
) -> Result<(f64, Vec<f64>)> {
    let (dt, gt) = tsallis_divergence_gradient(x, target, q, k)?;
    let (dc, gc) = tsallis_divergence_gradient(x, current, q, k)?;
    let grad = gt.iter().zip(&gc).map(|(a, b)| eta * a + (1.0 - eta) * b).collect();
    Ok((eta * dt + (1.0 - eta) * dc, grad))
}

/// Tsallis `D(π ‖ π̂)` and its gradient with respect to the flat parameters of
/// `π`, laid out as `[μ; ln σ; lower]`.
pub fn tsallis_divergence_gradient(
    g: &GaussianPolicyParams,
    ghat: &GaussianPolicyParams,
    q: f64,
    k: f64,
) -> Result<(f64, Vec<f64>)> {
    let reg = Regularizer::Tsallis { q, k };
    let value = bregman_div_gaussian(g, ghat, &reg)?;
    let d = g.dim();
    let theta = natural_params(g);
    let theta_hat = natural_params(ghat);
    let combined = theta.combine(1.0, &theta_hat, q - 1.0);
    let combined_params = from_natural_unclipped(&combined)?;
    let i_val = interaction_integral(g, ghat, 1.0, q - 1.0)?;

    let mu = DVector::from_column_slice(&g.mean);
    let mu_c = combined_params.0;
    let sigma_c = combined_params.1;
    let sigma = g.cov.compose();
    let g1 = &mu_c - &mu;
    let g2 = (&sigma_c + &mu_c * mu_c.transpose()) - (&sigma + &mu * mu.transpose());
    let outer = &g1 * mu.transpose();
    let m = (&outer + outer.transpose()) * 0.5 - g2 * 0.5;

    let u = g.cov.unit_lower_inverse();
    let inv_d2: Vec<f64> = g.cov.log_sigma().iter().map(|l| (-2.0 * l).exp()).collect();
    let prec = g.cov.invert();

    // gradient of ln I
    let d_mu = &prec * &g1;
    let d_logsigma: Vec<f64> = (0..d)
        .map(|i| {
            let ui = u.row(i).transpose();
            -2.0 * inv_d2[i] * ui.dot(&(&m * &ui))
        })
        .collect();
    let kmat: DMatrix<f64> = &u * &m * u.transpose() * DMatrix::from_diagonal(&DVector::from_vec(inv_d2.clone())) * &u;
    let mut d_lower = vec![0.0; d * d.saturating_sub(1) / 2];
    for a in 1..d {
        for b in 0..a {
            d_lower[lower_index(a, b)] = -2.0 * kmat[(b, a)];
        }
    }

    let scale = -k * q / (q - 1.0) * i_val;
    let power = log_power_integral(g, q).exp();
    let mut grad = Vec::with_capacity(2 * d + d_lower.len());
    grad.extend(d_mu.iter().map(|v| scale * v));
    grad.extend(d_logsigma.iter().map(|v| scale * v - k * power));
    grad.extend(d_lower.iter().map(|v| scale * v));
    Ok((value, grad))
}

/// Mean and covariance of the Gaussian with natural parameters `θ`, no clipping.
fn from_natural_unclipped(theta: &super::family::NaturalParams) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let p = (&theta.theta2 + theta.theta2.transpose()) * -1.0;
    let chol = p
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Inadmissible("combined natural parameter is not negative definite".into()))?;
    let sigma = chol.inverse();
    let mu = &sigma * &theta.theta1;
    Ok((mu, sigma))
}

fn project(x: &mut [f64], d: usize) {
    for v in &mut x[d..2 * d] {
        *v = clip_log_sigma(*v);
    }
}

fn projected_grad_norm(x: &[f64], grad: &[f64], d: usize) -> f64 {
    let (lo, hi) = (SIGMA_MIN.ln(), SIGMA_MAX.ln());
    grad.iter()
        .enumerate()
        .map(|(i, &g)| {
            if (d..2 * d).contains(&i) && ((x[i] <= lo && g > 0.0) || (x[i] >= hi && g < 0.0)) {
                0.0
            } else {
                g.abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Projected gradient descent with Barzilai-Borwein steps and Armijo
/// backtracking, warm-started at the best of the Shannon step and the two
/// endpoints.
pub fn tsallis_step(
    current: &GaussianPolicyParams,
    target: &GaussianPolicyParams,
    eta: f64,
    q: f64,
    k: f64,
) -> Result<TsallisStep> {
    if !(q > 1.0) {
        return Err(Error::InvalidArgument(format!("tsallis step needs q > 1, got {q}")));
    }
    let d = current.dim();
    let eval = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
        let g = GaussianPolicyParams::from_flat(d, x)?;
        step_objective(&g, current, target, eta, q, k)
    };

    let mut candidates = vec![current.to_flat(), target.to_flat()];
    if let Ok(s) = shannon_step(current, target, eta) {
        candidates.push(s.to_flat());
    }
    let mut best: Option<(Vec<f64>, f64, Vec<f64>)> = None;
    for c in candidates {
        let (v, g) = eval(&c)?;
        if best.as_ref().is_none_or(|b| v < b.1) {
            best = Some((c, v, g));
        }
    }
    let (mut x, mut fx, mut grad) = best.expect("at least one candidate");

    let mut step = 1.0;
    let mut iterations = 0;
    let mut grad_norm = projected_grad_norm(&x, &grad, d);
    while grad_norm >= GRAD_TOL && iterations < MAX_ITER {
        iterations += 1;
        let mut accepted = None;
        let mut s = step;
        for _ in 0..80 {
            let mut trial: Vec<f64> = x.iter().zip(&grad).map(|(xi, gi)| xi - s * gi).collect();
            project(&mut trial, d);
            let decrease: f64 = grad
                .iter()
                .zip(x.iter().zip(&trial))
                .map(|(g, (a, b))| g * (a - b))
                .sum();
            if let Ok((ft, gt)) = eval(&trial) {
                if ft.is_finite() && ft <= fx - 1e-4 * decrease {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            s *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            break;
        };
        let sdiff: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let ydiff: Vec<f64> = gn.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let ss: f64 = sdiff.iter().map(|v| v * v).sum();
        let sy: f64 = sdiff.iter().zip(&ydiff).map(|(a, b)| a * b).sum();
        step = if sy > 0.0 {
            (ss / sy).clamp(1e-10, 1e10)
        } else {
            (2.0 * s).min(1e10)
        };
        x = xn;
        fx = fn_;
        grad = gn;
        grad_norm = projected_grad_norm(&x, &grad, d);
    }
    if grad_norm >= GRAD_TOL {
        return Err(Error::OptimizerNonConvergence { iterations, grad_norm });
    }
    Ok(TsallisStep {
        params: GaussianPolicyParams::from_flat(d, &x)?,
        objective: fx,
        iterations,
        grad_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::LdlCovariance;
    use approx::assert_abs_diff_eq;

    fn normal1(mu: f64, sigma: f64) -> GaussianPolicyParams {
        GaussianPolicyParams::new(vec![mu], LdlCovariance::from_sigma(vec![], &[sigma]).unwrap()).unwrap()
    }

    fn g2(mean: [f64; 2], l: f64, s: [f64; 2]) -> GaussianPolicyParams {
        GaussianPolicyParams::new(mean.to_vec(), LdlCovariance::from_sigma(vec![l], &s).unwrap()).unwrap()
    }

    #[test]
    fn shannon_midpoint() {
        let r = md_update_gaussian(&normal1(0.0, 1.0), &normal1(4.0, 1.0), 0.5, &Regularizer::Shannon).unwrap();
        assert_abs_diff_eq!(r.mean[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.cov.sigma()[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn endpoints() {
        let a = g2([0.0, 1.0], 0.3, [0.5, 1.2]);
        let b = g2([5.0, 3.0], -0.5, [0.6, 0.8]);
        for reg in [Regularizer::Shannon, Regularizer::Tsallis { q: 2.0, k: 1.0 }] {
            let r0 = md_update_gaussian(&a, &b, 0.0, &reg).unwrap();
            let r1 = md_update_gaussian(&a, &b, 1.0, &reg).unwrap();
            for (x, y) in r0.to_flat().iter().zip(a.to_flat()) {
                assert_abs_diff_eq!(*x, y, epsilon = 1e-9);
            }
            for (x, y) in r1.to_flat().iter().zip(b.to_flat()) {
                assert_abs_diff_eq!(*x, y, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let x = g2([0.4, -0.2], 0.3, [0.9, 1.3]);
        let hat = g2([1.0, 0.5], -0.6, [0.7, 0.5]);
        for q in [1.5, 2.0, 3.0] {
            let (_, grad) = tsallis_divergence_gradient(&x, &hat, q, 1.3).unwrap();
            let flat = x.to_flat();
            let h = 1e-6;
            for i in 0..flat.len() {
                let mut up = flat.clone();
                let mut dn = flat.clone();
                up[i] += h;
                dn[i] -= h;
                let f = |v: &[f64]| {
                    bregman_div_gaussian(
                        &GaussianPolicyParams::from_flat(2, v).unwrap(),
                        &hat,
                        &Regularizer::Tsallis { q, k: 1.3 },
                    )
                    .unwrap()
                };
                let fd = (f(&up) - f(&dn)) / (2.0 * h);
                assert_abs_diff_eq!(grad[i], fd, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn tsallis_step_decreases_objective() {
        let cur = g2([0.0, 0.0], 0.0, [1.0, 1.0]);
        let tgt = g2([5.0, 3.0], 0.5, [0.6, 0.8]);
        let r = tsallis_step(&cur, &tgt, 0.2, 2.0, 1.0).unwrap();
        let at = |g: &GaussianPolicyParams| step_objective(g, &cur, &tgt, 0.2, 2.0, 1.0).unwrap().0;
        assert!(r.objective <= at(&cur) + 1e-9);
        assert!(r.objective <= at(&tgt) + 1e-9);
        assert!(r.grad_norm < GRAD_TOL);
    }
}
