//! Finite-action Bregman geometry.
//!
//! A [`Regularizer`] is a separable strictly convex function on the clamped
//! probability simplex, `Ω(p) = Σ_a f(p_a) + c`. Everything else in this
//! module derives from its kernel `f`: the divergence `D_Ω`, the mirror map
//! `∇Ω`, the conjugate map `∇Ω*` (solved numerically on the clamped simplex),
//! the regularized reward operator `Ψ_Ω` and the Bregman projection.

mod conjugate;
mod regularizer;

pub use conjugate::{bregman_project, ConjugateSolution};
pub use regularizer::{sin_convex_limit, Regularizer};

use crate::error::{Error, Result};

/// Lower clamp for every policy entry.
pub const EPS_MIN: f64 = 1e-6;

/// Tolerance on `Σ p = 1` for a valid [`ProbVector`].
pub const SUM_TOL: f64 = 1e-12;

/// A point on the clamped probability simplex.
///
/// Entries sum to one (within [`SUM_TOL`]) and lie in
/// `[EPS_MIN, 1 - (n-1)·EPS_MIN]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        validate(&values)?;
        Ok(ProbVector(values))
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "empty action set");
        ProbVector(vec![1.0 / n as f64; n])
    }

    /// Normalizes nonnegative weights and lifts entries below the clamp to
    /// `EPS_MIN`, rescaling the remaining mass proportionally.
    ///
    /// This is the KL projection onto the clamped simplex.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidProbVector("empty".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidProbVector(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidProbVector("weights sum to zero".into()));
        }
        let n = weights.len();
        let mut p: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut fixed = vec![false; n];
        loop {
            let mut changed = false;
            for (v, f) in p.iter_mut().zip(fixed.iter_mut()) {
                if !*f && *v < EPS_MIN {
                    *v = EPS_MIN;
                    *f = true;
                    changed = true;
                }
            }
            let n_fixed = fixed.iter().filter(|f| **f).count();
            let free_mass: f64 = p.iter().zip(&fixed).filter(|(_, f)| !**f).map(|(v, _)| *v).sum();
            let target = 1.0 - n_fixed as f64 * EPS_MIN;
            if free_mass > 0.0 {
                let scale = target / free_mass;
                for (v, f) in p.iter_mut().zip(&fixed) {
                    if !*f {
                        *v *= scale;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        ProbVector::new(p)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Upper clamp for a vector of this length.
    pub fn upper_bound(&self) -> f64 {
        upper_bound(self.len())
    }
}

impl AsRef<[f64]> for ProbVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn upper_bound(n: usize) -> f64 {
    1.0 - (n as f64 - 1.0) * EPS_MIN
}

fn validate(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidProbVector("empty".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "probability vector",
        });
    }
    let sum: f64 = values.iter().sum();
    if (sum - 1.0).abs() > SUM_TOL {
        return Err(Error::InvalidProbVector(format!("entries sum to {sum}")));
    }
    let hi = upper_bound(values.len());
    // one ulp of slack for entries produced exactly at the clamp
    let slack = 1e-15;
    if let Some(v) = values.iter().find(|v| **v < EPS_MIN - slack || **v > hi + slack) {
        return Err(Error::InvalidProbVector(format!("entry {v} outside [{EPS_MIN}, {hi}]")));
    }
    Ok(())
}

/// A point in the dual (reward) space `ℝ^A`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVector(Vec<f64>);

impl DualVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "dual vector" });
        }
        Ok(DualVector(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Adds `c` to every coordinate.
    pub fn shifted(&self, c: f64) -> DualVector {
        DualVector(self.0.iter().map(|v| v + c).collect())
    }
}

impl AsRef<[f64]> for DualVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Ω(p), with the per-kernel convex sign.
pub fn omega(p: &ProbVector, reg: &Regularizer) -> Result<f64> {
    let v = reg.value(p.as_slice());
    if !v.is_finite() {
        return Err(Error::NonFinite { context: "omega" });
    }
    Ok(v)
}

/// ∇Ω(p), componentwise.
pub fn grad_omega(p: &ProbVector, reg: &Regularizer) -> Result<DualVector> {
    DualVector::new(reg.gradient(p.as_slice()))
}

/// D_Ω(p ‖ phat) = Ω(p) − Ω(phat) − ⟨∇Ω(phat), p − phat⟩.
pub fn bregman_div(p: &ProbVector, phat: &ProbVector, reg: &Regularizer) -> Result<f64> {
    if p.len() != phat.len() {
        return Err(Error::LengthMismatch {
            expected: phat.len(),
            got: p.len(),
        });
    }
    Ok(reg.divergence(p.as_slice(), phat.as_slice()))
}

/// ∇Ω*(y): the maximizer of `⟨π, y⟩ − Ω(π)` over the clamped simplex.
pub fn grad_omega_star(y: &DualVector, reg: &Regularizer) -> Result<ProbVector> {
    Ok(conjugate::solve(y.as_slice(), reg)?.policy)
}

/// Like [`grad_omega_star`] but also reports clamping and solver statistics.
pub fn grad_omega_star_detailed(y: &DualVector, reg: &Regularizer) -> Result<ConjugateSolution> {
    conjugate::solve(y.as_slice(), reg)
}

/// Regularized reward operator:
/// `ψ_π = ∇Ω(π) − ⟨π, ∇Ω(π)⟩ + Ω(π)`.
pub fn reward_operator_psi(p: &ProbVector, reg: &Regularizer) -> Result<DualVector> {
    let grad = reg.gradient(p.as_slice());
    let inner: f64 = grad.iter().zip(p.as_slice()).map(|(g, x)| g * x).sum();
    let shift = omega(p, reg)? - inner;
    DualVector::new(grad.into_iter().map(|g| g + shift).collect())
}

/// Common interface over mirror maps, used by the identity checks so that a
/// deliberately broken map can be substituted.
pub trait MirrorMap: Sync {
    fn omega(&self, p: &[f64]) -> f64;
    fn grad_omega(&self, p: &[f64]) -> Vec<f64>;
    fn bregman_div(&self, p: &[f64], q: &[f64]) -> f64;
    fn grad_omega_star(&self, y: &[f64]) -> Result<Vec<f64>>;

    fn reward_psi(&self, p: &[f64]) -> Vec<f64> {
        let grad = self.grad_omega(p);
        let inner: f64 = grad.iter().zip(p).map(|(g, x)| g * x).sum();
        let shift = self.omega(p) - inner;
        grad.into_iter().map(|g| g + shift).collect()
    }

    /// Upper edge of the region where the kernel is convex, if bounded.
    fn convex_limit(&self) -> Option<f64> {
        None
    }
}

impl MirrorMap for Regularizer {
    fn omega(&self, p: &[f64]) -> f64 {
        self.value(p)
    }

    fn grad_omega(&self, p: &[f64]) -> Vec<f64> {
        self.gradient(p)
    }

    fn bregman_div(&self, p: &[f64], q: &[f64]) -> f64 {
        self.divergence(p, q)
    }

    fn grad_omega_star(&self, y: &[f64]) -> Result<Vec<f64>> {
        Ok(conjugate::solve(y, self)?.policy.into_vec())
    }

    fn convex_limit(&self) -> Option<f64> {
        Regularizer::convex_limit(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pv(v: &[f64]) -> ProbVector {
        ProbVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn prob_vector_rejects_bad_input() {
        assert!(ProbVector::new(vec![0.5, 0.6]).is_err());
        assert!(ProbVector::new(vec![1.0, 0.0]).is_err());
        assert!(ProbVector::new(vec![f64::NAN, 1.0]).is_err());
        assert!(ProbVector::new(vec![]).is_err());
    }

    #[test]
    fn from_weights_clamps_vertices() {
        let p = ProbVector::from_weights(&[1.0, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(p.as_slice()[1], EPS_MIN);
        assert_abs_diff_eq!(p.as_slice()[0], 1.0 - 2.0 * EPS_MIN, epsilon = 1e-15);
    }

    #[test]
    fn omega_examples() {
        let u = ProbVector::uniform(2);
        assert_abs_diff_eq!(
            omega(&u, &Regularizer::Shannon).unwrap(),
            -std::f64::consts::LN_2,
            epsilon = 1e-15
        );
        let t2 = Regularizer::tsallis(2.0, 1.0).unwrap();
        assert_abs_diff_eq!(omega(&u, &t2).unwrap(), -0.5, epsilon = 1e-15);
        let vertex = ProbVector::from_weights(&[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(omega(&vertex, &t2).unwrap(), 0.0, epsilon = 1e-5);
    }

    #[test]
    fn grad_omega_examples() {
        let u = ProbVector::uniform(2);
        let g = grad_omega(&u, &Regularizer::Shannon).unwrap();
        assert_abs_diff_eq!(g.as_slice()[0], 0.306_853, epsilon = 1e-6);
        assert_abs_diff_eq!(g.as_slice()[0], g.as_slice()[1]);
        let t2 = Regularizer::tsallis(2.0, 1.0).unwrap();
        let g = grad_omega(&u, &t2).unwrap();
        assert_eq!(g.as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn divergence_examples() {
        let p = pv(&[0.75, 0.25]);
        let q = ProbVector::uniform(2);
        let kl = bregman_div(&p, &q, &Regularizer::Shannon).unwrap();
        assert_abs_diff_eq!(kl, 0.130_812, epsilon = 1e-6);
        let t2 = Regularizer::tsallis(2.0, 1.0).unwrap();
        assert_abs_diff_eq!(bregman_div(&p, &q, &t2).unwrap(), 0.125, epsilon = 1e-15);
        for reg in Regularizer::all_default() {
            assert_abs_diff_eq!(bregman_div(&p, &p, &reg).unwrap(), 0.0, epsilon = 1e-15);
        }
        assert!(matches!(
            bregman_div(&p, &ProbVector::uniform(3), &Regularizer::Shannon),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn psi_for_shannon_is_log_policy() {
        let u = ProbVector::uniform(2);
        let psi = reward_operator_psi(&u, &Regularizer::Shannon).unwrap();
        for v in psi.as_slice() {
            assert_abs_diff_eq!(*v, 0.5f64.ln(), epsilon = 1e-15);
        }
        let back = grad_omega_star(&psi, &Regularizer::Shannon).unwrap();
        assert_abs_diff_eq!(back.as_slice()[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn psi_is_gradient_plus_constant() {
        let p = pv(&[0.2, 0.3, 0.5]);
        for reg in Regularizer::all_default() {
            let psi = reward_operator_psi(&p, &reg).unwrap();
            let g = grad_omega(&p, &reg).unwrap();
            let inner: f64 = g.as_slice().iter().zip(p.as_slice()).map(|(a, b)| a * b).sum();
            let c = omega(&p, &reg).unwrap() - inner;
            for (a, b) in psi.as_slice().iter().zip(g.as_slice()) {
                assert_abs_diff_eq!(a - b, c, epsilon = 1e-12);
            }
        }
    }
}
