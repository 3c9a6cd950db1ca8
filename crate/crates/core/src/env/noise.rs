use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Additive isotropic Gaussian corruption of demonstrated actions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    epsilon: f64,
}

impl NoiseSpec {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise epsilon must be nonnegative, got {epsilon}"
            )));
        }
        Ok(NoiseSpec { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// Adds i.i.d. `N(0, ε² I)` to every action. With `ε = 0` no randomness is drawn.
pub fn corrupt_demos<R: Rng + ?Sized>(actions: &[Vec<f64>], noise: NoiseSpec, rng: &mut R) -> Vec<Vec<f64>> {
    if noise.epsilon == 0.0 {
        return actions.to_vec();
    }
    actions
        .iter()
        .map(|a| {
            a.iter()
                .map(|x| x + noise.epsilon * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect()
}

/// Replaces each demonstrated action by a uniform draw with probability `ε`
/// (capped at 1).
pub fn corrupt_discrete<R: Rng + ?Sized>(
    actions: &[usize],
    num_actions: usize,
    noise: NoiseSpec,
    rng: &mut R,
) -> Vec<usize> {
    if noise.epsilon == 0.0 {
        return actions.to_vec();
    }
    let p = noise.epsilon.min(1.0);
    actions
        .iter()
        .map(|&a| {
            if rng.random::<f64>() < p {
                rng.random_range(0..num_actions)
            } else {
                a
            }
        })
        .collect()
}

/// Writes demonstrations as CSV rows `episode, a0, a1, …`.
pub fn write_demos_csv<W: Write>(writer: W, episodes: &[Vec<Vec<f64>>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(writer);
    let dim = episodes.iter().flatten().map(Vec::len).max().unwrap_or(0);
    let mut header = vec!["episode".to_string()];
    header.extend((0..dim).map(|i| format!("a{i}")));
    w.write_record(&header)?;
    for (e, ep) in episodes.iter().enumerate() {
        for a in ep {
            let mut row = vec![e.to_string()];
            row.extend(a.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_noise_is_identity() {
        let a = vec![vec![1.0, 2.0], vec![-3.0, 0.5]];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(corrupt_demos(&a, NoiseSpec::new(0.0).unwrap(), &mut rng), a);
    }

    #[test]
    fn discrete_noise_extremes() {
        let a = vec![2usize; 500];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(corrupt_discrete(&a, 4, NoiseSpec::new(0.0).unwrap(), &mut rng), a);
        let full = corrupt_discrete(&a, 4, NoiseSpec::new(1.0).unwrap(), &mut rng);
        let kept = full.iter().filter(|&&x| x == 2).count();
        assert!((80..170).contains(&kept), "{kept}");
    }

    #[test]
    fn rejects_negative_epsilon() {
        assert!(NoiseSpec::new(-0.1).is_err());
    }

    #[test]
    fn small_noise_is_small() {
        let a = vec![vec![0.0; 3]; 1000];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = corrupt_demos(&a, NoiseSpec::new(0.01).unwrap(), &mut rng);
        let max = out.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max < 0.06);
    }

    #[test]
    fn demos_csv_layout() {
        let mut buf = Vec::new();
        write_demos_csv(&mut buf, &[vec![vec![1.0, 2.0]], vec![vec![3.0, 4.5]]]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "episode,a0,a1\n0,1,2\n1,3,4.5\n");
    }
}
