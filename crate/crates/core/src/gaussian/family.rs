use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::ldl::{ldl_factor, ldl_solve, symmetrize, LdlCovariance};
use crate::bregman::Regularizer;
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Gaussian policy `N(μ, L diag(σ²) Lᵀ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicyParams {
    pub mean: Vec<f64>,
    pub cov: LdlCovariance,
}

/// Exponential-family coordinates `θ1 = Σ⁻¹μ`, `θ2 = -½Σ⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalParams {
    pub theta1: DVector<f64>,
    pub theta2: DMatrix<f64>,
}

impl NaturalParams {
    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &NaturalParams, b: f64) -> NaturalParams {
        NaturalParams {
            theta1: &self.theta1 * a + &other.theta1 * b,
            theta2: &self.theta2 * a + &other.theta2 * b,
        }
    }

    pub fn dim(&self) -> usize {
        self.theta1.len()
    }

    /// Precision `P = -2θ2`, with its factorization if it is positive definite.
    fn precision(&self) -> Result<(DMatrix<f64>, DMatrix<f64>, DVector<f64>)> {
        let p = symmetrize(&self.theta2 * -2.0);
        let (l, d) = ldl_factor(&p)
            .ok_or_else(|| Error::Inadmissible("second natural parameter is not negative definite".into()))?;
        Ok((p, l, d))
    }
}

impl GaussianPolicyParams {
    pub fn new(mean: Vec<f64>, cov: LdlCovariance) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::LengthMismatch {
                expected: cov.dim(),
                got: mean.len(),
            });
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "gaussian mean",
            });
        }
        Ok(GaussianPolicyParams { mean, cov })
    }

    pub fn standard(d: usize) -> Self {
        GaussianPolicyParams {
            mean: vec![0.0; d],
            cov: LdlCovariance::identity(d),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Flat layout `[μ; ln σ; lower]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.mean.clone();
        v.extend_from_slice(self.cov.log_sigma());
        v.extend_from_slice(self.cov.lower());
        v
    }

    pub fn from_flat(d: usize, flat: &[f64]) -> Result<Self> {
        let m = d * (d.saturating_sub(1)) / 2;
        if flat.len() != 2 * d + m {
            return Err(Error::LengthMismatch {
                expected: 2 * d + m,
                got: flat.len(),
            });
        }
        let cov = LdlCovariance::new(flat[2 * d..].to_vec(), flat[d..2 * d].to_vec())?;
        Self::new(flat[..d].to_vec(), cov)
    }

    pub fn log_density(&self, a: &[f64]) -> f64 {
        let u = self.cov.unit_lower_inverse();
        let diff = DVector::from_iterator(self.dim(), a.iter().zip(&self.mean).map(|(x, m)| x - m));
        let z = u * diff;
        let quad: f64 = z
            .iter()
            .zip(self.cov.log_sigma())
            .map(|(z, l)| (z * (-l).exp()).powi(2))
            .sum();
        -0.5 * quad - 0.5 * self.dim() as f64 * LN_2PI - self.cov.log_sigma().iter().sum::<f64>()
    }

    pub fn density(&self, a: &[f64]) -> f64 {
        self.log_density(a).exp()
    }
}

pub fn natural_params(g: &GaussianPolicyParams) -> NaturalParams {
    let prec = g.cov.invert();
    let theta1 = &prec * DVector::from_column_slice(&g.mean);
    NaturalParams {
        theta1,
        theta2: prec * -0.5,
    }
}

/// Inverse of [`natural_params`]; σ is clipped on the way back.
pub fn from_natural(theta: &NaturalParams) -> Result<GaussianPolicyParams> {
    let (_, l, d) = theta.precision()?;
    let n = theta.dim();
    let mean = ldl_solve(&l, &d, &theta.theta1);
    let mut sigma = DMatrix::<f64>::zeros(n, n);
    for c in 0..n {
        let mut e = DVector::<f64>::zeros(n);
        e[c] = 1.0;
        sigma.set_column(c, &ldl_solve(&l, &d, &e));
    }
    let cov = LdlCovariance::decompose(&symmetrize(sigma))?;
    GaussianPolicyParams::new(mean.iter().copied().collect(), cov)
}

/// Log-partition `F(θ) = ½ μᵀPμ + ½ d ln 2π − ½ ln|P|` with `P = -2θ2`.
pub fn log_partition(theta: &NaturalParams) -> Result<f64> {
    let (_, l, d) = theta.precision()?;
    let mu = ldl_solve(&l, &d, &theta.theta1);
    let quad = theta.theta1.dot(&mu);
    let logdet_p: f64 = d.iter().map(|v| v.ln()).sum();
    Ok(0.5 * quad + 0.5 * theta.dim() as f64 * LN_2PI - 0.5 * logdet_p)
}

/// `I(α, β) = ∫ π^α π̂^β = exp{F(αθ + βθ̂) − αF(θ) − βF(θ̂)}`.
pub fn interaction_integral(
    g: &GaussianPolicyParams,
    ghat: &GaussianPolicyParams,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    Ok(log_interaction(g, ghat, alpha, beta)?.exp())
}

fn log_interaction(g: &GaussianPolicyParams, ghat: &GaussianPolicyParams, alpha: f64, beta: f64) -> Result<f64> {
    check_dims(g, ghat)?;
    let t = natural_params(g);
    let th = natural_params(ghat);
    let combined = t.combine(alpha, &th, beta);
    Ok(log_partition(&combined)? - alpha * log_partition(&t)? - beta * log_partition(&th)?)
}

fn check_dims(g: &GaussianPolicyParams, ghat: &GaussianPolicyParams) -> Result<()> {
    if g.dim() != ghat.dim() {
        return Err(Error::LengthMismatch {
            expected: g.dim(),
            got: ghat.dim(),
        });
    }
    Ok(())
}

/// `ln ∫ π^q = (1−q)(½ d ln 2π + Σ ln σ_i) − ½ d ln q`.
pub(crate) fn log_power_integral(g: &GaussianPolicyParams, q: f64) -> f64 {
    let d = g.dim() as f64;
    (1.0 - q) * (0.5 * d * LN_2PI + g.cov.log_sigma().iter().sum::<f64>()) - 0.5 * d * q.ln()
}

/// Tsallis entropy `k (1 − ∫π^q) / (q − 1)`.
pub fn tsallis_entropy_gaussian(g: &GaussianPolicyParams, q: f64, k: f64) -> Result<f64> {
    if !(q > 1.0) {
        return Err(Error::InvalidArgument(format!("tsallis entropy needs q > 1, got {q}")));
    }
    Ok(k * -log_power_integral(g, q).exp_m1() / (q - 1.0))
}

/// Differential entropy `½ d ln(2πe) + Σ ln σ_i`.
pub fn shannon_entropy_gaussian(g: &GaussianPolicyParams) -> f64 {
    0.5 * g.dim() as f64 * (LN_2PI + 1.0) + g.cov.log_sigma().iter().sum::<f64>()
}

/// Closed-form `KL(π ‖ π̂)`.
pub fn kl_gaussian(g: &GaussianPolicyParams, ghat: &GaussianPolicyParams) -> Result<f64> {
    check_dims(g, ghat)?;
    let prec_hat = ghat.cov.invert();
    let sigma = g.cov.compose();
    let trace = (&prec_hat * sigma).trace();
    let diff = DVector::from_iterator(g.dim(), ghat.mean.iter().zip(&g.mean).map(|(a, b)| a - b));
    let maha = diff.dot(&(&prec_hat * &diff));
    Ok(0.5 * (trace + maha - g.dim() as f64 + ghat.cov.logdet() - g.cov.logdet()))
}

/// `D_Ω(π ‖ π̂)` for Shannon or Tsallis regularizers.
///
/// Tsallis: `k [q/(q−1) − q/(q−1)·I(π,π̂;1,q−1) − T(π) − (q−1)T(π̂)]` with `T`
/// the unit-scale Tsallis entropy.
pub fn bregman_div_gaussian(g: &GaussianPolicyParams, ghat: &GaussianPolicyParams, reg: &Regularizer) -> Result<f64> {
    match *reg {
        Regularizer::Shannon => kl_gaussian(g, ghat),
        Regularizer::Tsallis { q, k } => {
            let i = interaction_integral(g, ghat, 1.0, q - 1.0)?;
            let t = tsallis_entropy_gaussian(g, q, 1.0)?;
            let th = tsallis_entropy_gaussian(ghat, q, 1.0)?;
            Ok(k * (q / (q - 1.0) * (1.0 - i) - t - (q - 1.0) * th))
        }
        other => Err(Error::InvalidArgument(format!(
            "no closed form for the {} regularizer on Gaussian policies",
            other.name()
        ))),
    }
}

/// Tractable reward `ψ_π(a) = q k φ(π(a)) + (q−1) T_q^k(π)` with
/// `φ(x) = (x^{q−1} − 1)/(q−1)`; reduces to `k ln π(a)` at `q = 1`.
pub fn psi_gaussian(g: &GaussianPolicyParams, a: &[f64], q: f64, k: f64) -> Result<f64> {
    if q < 1.0 {
        return Err(Error::InvalidArgument(format!("psi needs q >= 1, got {q}")));
    }
    let log_pi = g.log_density(a);
    if q == 1.0 {
        return Ok(k * log_pi);
    }
    let phi = ((q - 1.0) * log_pi).exp_m1() / (q - 1.0);
    Ok(q * k * phi + (q - 1.0) * tsallis_entropy_gaussian(g, q, k)?)
}

/// Draws `a = μ + L(σ ⊙ z)` with `z ~ N(0, I)`.
pub fn sample_action<R: Rng + ?Sized>(g: &GaussianPolicyParams, rng: &mut R) -> Vec<f64> {
    let z: Vec<f64> = (0..g.dim()).map(|_| rng.sample(StandardNormal)).collect();
    g.cov.scale(&z).into_iter().zip(&g.mean).map(|(s, m)| s + m).collect()
}

/// `∫ π^q` for reporting.
pub fn power_integral(g: &GaussianPolicyParams, q: f64) -> f64 {
    log_power_integral(g, q).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn normal1(mu: f64, sigma: f64) -> GaussianPolicyParams {
        GaussianPolicyParams::new(vec![mu], LdlCovariance::from_sigma(vec![], &[sigma]).unwrap()).unwrap()
    }

    #[test]
    fn log_partition_examples() {
        let f = |g: &GaussianPolicyParams| log_partition(&natural_params(g)).unwrap();
        assert_abs_diff_eq!(f(&normal1(0.0, 1.0)), 0.918_939, epsilon = 1e-6);
        assert_abs_diff_eq!(f(&normal1(2.0, 1.0)), 2.918_939, epsilon = 1e-6);
        assert_abs_diff_eq!(f(&GaussianPolicyParams::standard(2)), 1.837_877, epsilon = 1e-6);
    }

    #[test]
    fn log_partition_rejects_positive_theta2() {
        let theta = NaturalParams {
            theta1: DVector::from_vec(vec![0.0]),
            theta2: DMatrix::from_vec(1, 1, vec![0.5]),
        };
        assert!(matches!(log_partition(&theta), Err(Error::Inadmissible(_))));
    }

    #[test]
    fn interaction_examples() {
        let n = normal1(0.0, 1.0);
        let m = normal1(3.0, 0.5);
        assert_abs_diff_eq!(interaction_integral(&n, &n, 1.0, 0.0).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(interaction_integral(&n, &m, 1.0, 0.0).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            interaction_integral(&n, &n, 2.0, 0.0).unwrap(),
            0.5 / PI.sqrt(),
            epsilon = 1e-12
        );
        assert!(interaction_integral(&n, &m, -1.0, 0.0).is_err());
    }

    #[test]
    fn tsallis_entropy_examples() {
        let n = normal1(0.0, 1.0);
        let t = tsallis_entropy_gaussian(&n, 2.0, 1.0).unwrap();
        assert_abs_diff_eq!(t, 1.0 - 1.0 / (4.0 * PI).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(t, 0.717_905, epsilon = 1e-6);
        assert!(tsallis_entropy_gaussian(&normal1(0.0, 1.5), 2.0, 1.0).unwrap() > t);
        assert!(tsallis_entropy_gaussian(&n, 1.0, 1.0).is_err());
        let near = tsallis_entropy_gaussian(&n, 1.0 + 1e-5, 1.0).unwrap();
        assert_abs_diff_eq!(near, shannon_entropy_gaussian(&n), epsilon = 1e-4);
    }

    #[test]
    fn power_integral_matches_partition_route() {
        let g = GaussianPolicyParams::new(
            vec![0.3, -1.0],
            LdlCovariance::from_sigma(vec![0.4], &[0.7, 1.3]).unwrap(),
        )
        .unwrap();
        let via_f = log_interaction(&g, &g, 2.5, 0.0).unwrap();
        assert_abs_diff_eq!(via_f, log_power_integral(&g, 2.5), epsilon = 1e-12);
    }

    #[test]
    fn divergence_examples() {
        let a = normal1(0.0, 1.0);
        let b = normal1(1.0, 1.0);
        assert_abs_diff_eq!(
            bregman_div_gaussian(&a, &b, &Regularizer::Shannon).unwrap(),
            0.5,
            epsilon = 1e-12
        );
        for reg in [Regularizer::Shannon, Regularizer::Tsallis { q: 2.0, k: 1.0 }] {
            assert_abs_diff_eq!(bregman_div_gaussian(&a, &a, &reg).unwrap(), 0.0, epsilon = 1e-12);
            assert!(bregman_div_gaussian(&a, &b, &reg).unwrap() > 0.0);
        }
        assert!(bregman_div_gaussian(&a, &b, &Regularizer::Exp).is_err());
    }

    #[test]
    fn tsallis_q2_divergence_is_l2_distance() {
        // for q = 2 the divergence is ∫(π − π̂)²
        let a = normal1(0.0, 1.0);
        let b = normal1(0.5, 0.8);
        let d = bregman_div_gaussian(&a, &b, &Regularizer::Tsallis { q: 2.0, k: 1.0 }).unwrap();
        let l2 = interaction_integral(&a, &a, 2.0, 0.0).unwrap()
            - 2.0 * interaction_integral(&a, &b, 1.0, 1.0).unwrap()
            + interaction_integral(&b, &b, 2.0, 0.0).unwrap();
        assert_abs_diff_eq!(d, l2, epsilon = 1e-12);
    }

    #[test]
    fn psi_examples() {
        let n = normal1(0.0, 1.0);
        assert_abs_diff_eq!(psi_gaussian(&n, &[0.0], 1.0, 1.0).unwrap(), -0.918_939, epsilon = 1e-6);
        let mode = psi_gaussian(&n, &[0.0], 2.0, 1.0).unwrap();
        let off = psi_gaussian(&n, &[1.0], 2.0, 1.0).unwrap();
        assert!(mode > off);
        let peak = 1.0 / (2.0 * PI).sqrt();
        let expected = 2.0 * (peak - 1.0) + (1.0 - 1.0 / (4.0 * PI).sqrt());
        assert_abs_diff_eq!(mode, expected, epsilon = 1e-12);
    }

    #[test]
    fn natural_round_trip() {
        let g = GaussianPolicyParams::new(
            vec![1.0, -2.0, 0.5],
            LdlCovariance::from_sigma(vec![0.2, -0.4, 0.9], &[0.5, 1.5, 0.8]).unwrap(),
        )
        .unwrap();
        let back = from_natural(&natural_params(&g)).unwrap();
        for (a, b) in back.to_flat().iter().zip(g.to_flat()) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn flat_round_trip() {
        let g = GaussianPolicyParams::new(
            vec![1.0, 2.0],
            LdlCovariance::from_sigma(vec![0.3], &[0.5, 1.5]).unwrap(),
        )
        .unwrap();
        assert_eq!(GaussianPolicyParams::from_flat(2, &g.to_flat()).unwrap(), g);
        assert!(GaussianPolicyParams::from_flat(2, &[0.0; 4]).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        use rand::SeedableRng;
        let g = GaussianPolicyParams::standard(2);
        let mut a = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut b = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            assert_eq!(sample_action(&g, &mut a), sample_action(&g, &mut b));
        }
    }
}
