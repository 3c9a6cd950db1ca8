use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{GaussianPolicyParams, LdlCovariance, SIGMA_MIN};

/// Two-dimensional Gaussian imitation problem with a tight expert.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianToySpec {
    pub expert: GaussianPolicyParams,
    pub agent_init: GaussianPolicyParams,
    pub reference_lr: f64,
    pub batch_size: usize,
}

impl GaussianToySpec {
    pub fn new(
        expert: GaussianPolicyParams,
        agent_init: GaussianPolicyParams,
        reference_lr: f64,
        batch_size: usize,
    ) -> Result<Self> {
        if expert.dim() != agent_init.dim() {
            return Err(Error::LengthMismatch {
                expected: expert.dim(),
                got: agent_init.dim(),
            });
        }
        if expert.cov.logdet() >= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "expert covariance must have determinant below 1, got {}",
                expert.cov.logdet().exp()
            )));
        }
        if !(0.0..=1.0).contains(&reference_lr) {
            return Err(Error::InvalidArgument(format!(
                "reference_lr must lie in [0, 1], got {reference_lr}"
            )));
        }
        if batch_size < 2 {
            return Err(Error::InvalidArgument("batch_size must be at least 2".into()));
        }
        Ok(GaussianToySpec {
            expert,
            agent_init,
            reference_lr,
            batch_size,
        })
    }

    /// Expert `N([5, 3], Σ_E)` with `|Σ_E| = 0.2304`, agent starting at `N(0, I)`.
    pub fn standard() -> Self {
        let cov = LdlCovariance::from_sigma(vec![0.5], &[0.6, 0.8]).expect("valid factors");
        let expert = GaussianPolicyParams::new(vec![5.0, 3.0], cov).expect("valid expert");
        Self::new(expert, GaussianPolicyParams::standard(2), 0.5, 16).expect("valid toy spec")
    }
}

/// Moves the mean and second moment of `prev` toward the batch estimates by
/// `lr`, then refactors the covariance with σ clipping.
///
/// A degenerate result falls back to adding `σ_min² I`.
pub fn fit_reference_gaussian(
    prev: &GaussianPolicyParams,
    batch: &[Vec<f64>],
    lr: f64,
) -> Result<GaussianPolicyParams> {
    if batch.len() < 2 {
        return Err(Error::InvalidArgument(
            "reference batch needs at least two points".into(),
        ));
    }
    if !(0.0..=1.0).contains(&lr) {
        return Err(Error::InvalidArgument(format!("lr must lie in [0, 1], got {lr}")));
    }
    let d = prev.dim();
    if let Some(bad) = batch.iter().find(|x| x.len() != d) {
        return Err(Error::LengthMismatch {
            expected: d,
            got: bad.len(),
        });
    }
    if lr == 0.0 {
        return Ok(prev.clone());
    }
    let n = batch.len() as f64;
    let mut m = DVector::<f64>::zeros(d);
    let mut s2 = DMatrix::<f64>::zeros(d, d);
    for x in batch {
        let v = DVector::from_column_slice(x);
        s2 += &v * v.transpose();
        m += v;
    }
    m /= n;
    s2 /= n;
    let mu_prev = DVector::from_column_slice(&prev.mean);
    let m2_prev = prev.cov.compose() + &mu_prev * mu_prev.transpose();
    let mu = &mu_prev * (1.0 - lr) + &m * lr;
    let m2 = m2_prev * (1.0 - lr) + s2 * lr;
    let sigma = m2 - &mu * mu.transpose();
    let sigma = (&sigma + sigma.transpose()) * 0.5;
    let cov = LdlCovariance::decompose(&sigma)
        .or_else(|_| LdlCovariance::decompose(&(&sigma + DMatrix::identity(d, d) * SIGMA_MIN * SIGMA_MIN)))
        .unwrap_or_else(|_| {
            LdlCovariance::new(vec![0.0; d * (d - 1) / 2], vec![SIGMA_MIN.ln(); d]).expect("valid fallback")
        });
    GaussianPolicyParams::new(mu.iter().copied().collect(), cov)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_spec_is_tight() {
        let s = GaussianToySpec::standard();
        assert!((s.expert.cov.logdet().exp() - 0.2304).abs() < 1e-12);
    }

    #[test]
    fn rejects_wide_expert() {
        let e = GaussianPolicyParams::standard(2);
        assert!(GaussianToySpec::new(e, GaussianPolicyParams::standard(2), 0.5, 16).is_err());
    }

    #[test]
    fn zero_rate_keeps_prev() {
        let prev = GaussianPolicyParams::standard(2);
        let batch = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        assert_eq!(fit_reference_gaussian(&prev, &batch, 0.0).unwrap(), prev);
    }

    #[test]
    fn identical_points_clip_sigma() {
        let prev = GaussianPolicyParams::standard(2);
        let batch = vec![vec![1.0, 2.0]; 8];
        let g = fit_reference_gaussian(&prev, &batch, 1.0).unwrap();
        for s in g.cov.sigma() {
            assert!((s - SIGMA_MIN).abs() < 1e-9);
        }
        assert!((g.mean[0] - 1.0).abs() < 1e-12);
    }
}
