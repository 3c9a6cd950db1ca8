use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bregman::ProbVector;
use crate::error::{Error, Result};

/// Stateless expert `π_E = softmax(z)` observed through small batches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditSpec {
    pub num_actions: usize,
    pub expert_logits: Vec<f64>,
    pub samples_per_round: usize,
    /// Dirichlet pseudo-count added to every action.
    pub smoothing: f64,
    /// Moving-average rate of the reference estimate.
    pub reference_lr: f64,
}

impl BanditSpec {
    pub const DEFAULT_SAMPLES: usize = 16;
    pub const DEFAULT_SMOOTHING: f64 = 0.1;
    pub const DEFAULT_REFERENCE_LR: f64 = 0.5;

    pub fn new(expert_logits: Vec<f64>, samples_per_round: usize, smoothing: f64, reference_lr: f64) -> Result<Self> {
        if expert_logits.is_empty() {
            return Err(Error::InvalidArgument("bandit needs at least one action".into()));
        }
        if expert_logits.iter().any(|z| !z.is_finite()) {
            return Err(Error::NonFinite {
                context: "expert logits",
            });
        }
        if samples_per_round == 0 {
            return Err(Error::InvalidArgument("samples_per_round must be at least 1".into()));
        }
        if !(smoothing.is_finite() && smoothing >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "smoothing must be nonnegative, got {smoothing}"
            )));
        }
        if !(0.0..=1.0).contains(&reference_lr) {
            return Err(Error::InvalidArgument(format!(
                "reference_lr must lie in [0, 1], got {reference_lr}"
            )));
        }
        Ok(BanditSpec {
            num_actions: expert_logits.len(),
            expert_logits,
            samples_per_round,
            smoothing,
            reference_lr,
        })
    }

    /// Logits drawn i.i.d. from `N(0, 1)` with default batch and smoothing.
    pub fn random<R: Rng + ?Sized>(num_actions: usize, rng: &mut R) -> Result<Self> {
        let logits = (0..num_actions).map(|_| rng.sample(StandardNormal)).collect();
        Self::new(
            logits,
            Self::DEFAULT_SAMPLES,
            Self::DEFAULT_SMOOTHING,
            Self::DEFAULT_REFERENCE_LR,
        )
    }

    pub fn expert_policy(&self) -> Result<ProbVector> {
        softmax(&self.expert_logits)
    }
}

/// `softmax(z)` lifted onto the clamped simplex.
pub fn softmax(z: &[f64]) -> Result<ProbVector> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    ProbVector::from_weights(&w)
}

/// `samples_per_round` i.i.d. actions from the expert.
pub fn sample_expert_bandit<R: Rng + ?Sized>(spec: &BanditSpec, rng: &mut R) -> Result<Vec<usize>> {
    let pi = spec.expert_policy()?;
    sample_categorical(&pi, spec.samples_per_round, rng)
}

pub fn sample_categorical<R: Rng + ?Sized>(pi: &ProbVector, n: usize, rng: &mut R) -> Result<Vec<usize>> {
    let dist = WeightedIndex::new(pi.as_slice().iter().copied()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok((0..n).map(|_| dist.sample(rng)).collect())
}

/// Moving average of `prev` toward the Dirichlet-smoothed empirical
/// distribution of `batch`, using the spec's smoothing and rate.
pub fn fit_reference_discrete(prev: &ProbVector, batch: &[usize], spec: &BanditSpec) -> Result<ProbVector> {
    fit_reference_counts(prev, batch, spec.smoothing, spec.reference_lr)
}

pub fn fit_reference_counts(prev: &ProbVector, batch: &[usize], smoothing: f64, lr: f64) -> Result<ProbVector> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("reference batch is empty".into()));
    }
    let a = prev.len();
    let mut counts = vec![0.0; a];
    for &x in batch {
        *counts
            .get_mut(x)
            .ok_or_else(|| Error::InvalidArgument(format!("action {x} out of range for {a} actions")))? += 1.0;
    }
    if lr == 0.0 {
        return Ok(prev.clone());
    }
    let denom = batch.len() as f64 + a as f64 * smoothing;
    let mixed: Vec<f64> = prev
        .as_slice()
        .iter()
        .zip(&counts)
        .map(|(p, c)| (1.0 - lr) * p + lr * (c + smoothing) / denom)
        .collect();
    ProbVector::from_weights(&mixed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dominant_logit_concentrates() {
        let mut z = vec![0.0; 10];
        z[3] = 20.0;
        let spec = BanditSpec::new(z, 16, 0.1, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_expert_bandit(&spec, &mut rng).unwrap().iter().all(|&a| a == 3));
    }

    #[test]
    fn seeded_draws_repeat() {
        let mut r = ChaCha8Rng::seed_from_u64(4);
        let spec = BanditSpec::random(100, &mut r).unwrap();
        let a = sample_expert_bandit(&spec, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = sample_expert_bandit(&spec, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_rate_keeps_prev() {
        let prev = ProbVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(fit_reference_counts(&prev, &[0, 0], 0.1, 0.0).unwrap(), prev);
    }

    #[test]
    fn mass_moves_toward_observed_action_monotonically() {
        let prev = ProbVector::uniform(4);
        let mut last = 0.25;
        for lr in [0.1, 0.3, 0.6, 1.0] {
            let p = fit_reference_counts(&prev, &[0; 16], 0.1, lr).unwrap();
            assert!(p.as_slice()[0] > last);
            last = p.as_slice()[0];
        }
    }

    #[test]
    fn rejects_empty_batch_and_bad_action() {
        let prev = ProbVector::uniform(2);
        assert!(fit_reference_counts(&prev, &[], 0.1, 0.5).is_err());
        assert!(fit_reference_counts(&prev, &[2], 0.1, 0.5).is_err());
    }
}
