use super::VisitationDensity;
use crate::bregman::DualVector;
use crate::error::{Error, Result};

/// Floor applied to densities before taking the log ratio.
pub const DENSITY_FLOOR: f64 = 1e-12;

/// `ψ^λ(s, a) = λ ψ(s, a) + ln(ρ_E(s) / ρ_θ(s))`.
pub fn psi_lambda_reward(
    psi: &[DualVector],
    rho_expert: &VisitationDensity,
    rho_agent: &VisitationDensity,
    lambda: f64,
) -> Result<Vec<DualVector>> {
    if rho_expert.len() != psi.len() || rho_agent.len() != psi.len() {
        return Err(Error::LengthMismatch {
            expected: psi.len(),
            got: rho_expert.len().min(rho_agent.len()),
        });
    }
    psi.iter()
        .zip(rho_expert.rho.iter().zip(&rho_agent.rho))
        .map(|(row, (&re, &ra))| {
            let d = re.max(DENSITY_FLOOR).ln() - ra.max(DENSITY_FLOOR).ln();
            DualVector::new(row.as_slice().iter().map(|v| lambda * v + d).collect())
        })
        .collect()
}

/// Subtracts an exponential moving mean, updated before subtraction and
/// initialized to the first value seen.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardNormalizer {
    momentum: f64,
    mean: Option<f64>,
}

impl RewardNormalizer {
    pub const DEFAULT_MOMENTUM: f64 = 0.99;

    pub fn new(momentum: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::InvalidArgument(format!(
                "momentum must lie in [0, 1), got {momentum}"
            )));
        }
        Ok(RewardNormalizer { momentum, mean: None })
    }

    pub fn mean(&self) -> Option<f64> {
        self.mean
    }

    pub fn normalize(&mut self, x: f64) -> f64 {
        let m = match self.mean {
            None => x,
            Some(m) => self.momentum * m + (1.0 - self.momentum) * x,
        };
        self.mean = Some(m);
        x - m
    }
}

impl Default for RewardNormalizer {
    fn default() -> Self {
        RewardNormalizer {
            momentum: Self::DEFAULT_MOMENTUM,
            mean: None,
        }
    }
}

pub fn normalize_rewards(values: &[f64], momentum: f64) -> Result<Vec<f64>> {
    let mut n = RewardNormalizer::new(momentum)?;
    Ok(values.iter().map(|&v| n.normalize(v)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dens(v: &[f64]) -> VisitationDensity {
        VisitationDensity::new(v.to_vec()).unwrap()
    }

    #[test]
    fn equal_densities_give_scaled_psi() {
        let psi = vec![DualVector::new(vec![1.0, -2.0]).unwrap()];
        let r = psi_lambda_reward(&psi, &dens(&[1.0]), &dens(&[1.0]), 0.5).unwrap();
        assert_eq!(r[0].as_slice(), &[0.5, -1.0]);
    }

    #[test]
    fn zero_lambda_is_state_only() {
        let psi = vec![DualVector::new(vec![1.0, -2.0]).unwrap(); 2];
        let r = psi_lambda_reward(&psi, &dens(&[0.25, 0.75]), &dens(&[0.5, 0.5]), 0.0).unwrap();
        assert_eq!(r[0].as_slice(), &[0.5f64.ln(); 2]);
        assert_eq!(r[1].as_slice(), &[1.5f64.ln(); 2]);
    }

    #[test]
    fn zero_density_is_floored() {
        let psi = vec![DualVector::new(vec![0.0]).unwrap()];
        let r = psi_lambda_reward(&psi, &dens(&[0.0]), &dens(&[1.0]), 1.0).unwrap();
        assert!((r[0].as_slice()[0] - DENSITY_FLOOR.ln()).abs() < 1e-12);
    }

    #[test]
    fn momentum_zero_outputs_zero() {
        let out = normalize_rewards(&[3.0, -1.0, 7.5], 0.0).unwrap();
        assert_eq!(out, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn constant_stream_decays() {
        let out = normalize_rewards(&[2.0; 10], 0.9).unwrap();
        assert!(out.iter().all(|v| *v == 0.0));
        let out = normalize_rewards(&[0.0, 1.0, 1.0, 1.0, 1.0, 1.0], 0.5).unwrap();
        for w in out[1..].windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn bad_momentum() {
        assert!(RewardNormalizer::new(1.0).is_err());
        assert!(RewardNormalizer::new(-0.1).is_err());
    }
}
