use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::TabularPolicy;
use crate::env::TabularMdpSpec;
use crate::error::{Error, Result};

/// Discounted state occupancy `ρ_π(s) = (1−γ) E_π[Σ_i γ^i 1{s_i = s}]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitationDensity {
    pub rho: Vec<f64>,
}

impl VisitationDensity {
    pub fn new(rho: Vec<f64>) -> Result<Self> {
        if rho.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument(
                "density entries must be finite and nonnegative".into(),
            ));
        }
        Ok(VisitationDensity { rho })
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }
}

/// Solves `(I − γ P_πᵀ) ρ = (1−γ) μ0` by LU factorization.
pub fn visitation_density(mdp: &TabularMdpSpec, pi: &TabularPolicy, gamma: f64) -> Result<VisitationDensity> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!("gamma must lie in [0, 1), got {gamma}")));
    }
    let n = mdp.num_states();
    let kernel = mdp.policy_kernel(pi)?;
    let a = DMatrix::<f64>::identity(n, n) - kernel.transpose() * gamma;
    let b = DVector::from_iterator(n, mdp.initial().iter().map(|m| (1.0 - gamma) * m));
    let rho = a
        .clone()
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::InvalidArgument("visitation system is singular".into()))?;
    let residual = (&a * &rho - &b).amax();
    if residual > 1e-10 {
        return Err(Error::SolverNonConvergence {
            iterations: 1,
            residual,
        });
    }
    // clear rounding-level negatives
    VisitationDensity::new(rho.iter().map(|v| v.max(0.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bregman::ProbVector;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_state() {
        let mdp = TabularMdpSpec::single_state(3).unwrap();
        let rho = visitation_density(&mdp, &TabularPolicy::uniform(1, 3), 0.0).unwrap();
        assert_eq!(rho.rho, vec![1.0]);
    }

    #[test]
    fn gamma_zero_returns_initial() {
        let mdp = TabularMdpSpec::gridworld(3, 0.1, 0.9).unwrap();
        let rho = visitation_density(&mdp, &TabularPolicy::uniform(9, 4), 0.0).unwrap();
        for (r, m) in rho.rho.iter().zip(mdp.initial()) {
            assert_abs_diff_eq!(*r, *m, epsilon = 1e-15);
        }
    }

    #[test]
    fn two_state_chain_by_hand() {
        // one action; 0 -> 1 w.p. 0.3, 1 -> 0 w.p. 0.2; start at 0
        let p = vec![0.7, 0.3, 0.2, 0.8];
        let mdp = TabularMdpSpec::new(2, 1, p, vec![1.0, 0.0], 0.9).unwrap();
        let pi = TabularPolicy::new(vec![ProbVector::new(vec![1.0]).unwrap(); 2]).unwrap();
        let rho = visitation_density(&mdp, &pi, 0.9).unwrap();
        // (1 − 0.63) ρ0 − 0.18 ρ1 = 0.1 ; −0.27 ρ0 + (1 − 0.72) ρ1 = 0
        let det = 0.37 * 0.28 - 0.18 * 0.27;
        let r0 = 0.1 * 0.28 / det;
        let r1 = 0.27 * r0 / 0.28;
        assert_abs_diff_eq!(rho.rho[0], r0, epsilon = 1e-12);
        assert_abs_diff_eq!(rho.rho[1], r1, epsilon = 1e-12);
        assert_abs_diff_eq!(rho.rho.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }
}
