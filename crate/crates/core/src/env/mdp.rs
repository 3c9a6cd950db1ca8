use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::TabularPolicy;
use crate::error::{Error, Result};

/// Finite MDP `(S, A, P, μ0, γ)` without rewards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularMdpSpec {
    num_states: usize,
    num_actions: usize,
    /// `P[s][a][s']`, flattened.
    transitions: Vec<f64>,
    initial: Vec<f64>,
    gamma: f64,
}

const ROW_TOL: f64 = 1e-12;

impl TabularMdpSpec {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transitions: Vec<f64>,
        initial: Vec<f64>,
        gamma: f64,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::InvalidArgument("MDP needs at least one state and action".into()));
        }
        if transitions.len() != num_states * num_actions * num_states {
            return Err(Error::LengthMismatch {
                expected: num_states * num_actions * num_states,
                got: transitions.len(),
            });
        }
        if initial.len() != num_states {
            return Err(Error::LengthMismatch {
                expected: num_states,
                got: initial.len(),
            });
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidArgument(format!("gamma must lie in [0, 1), got {gamma}")));
        }
        let check = |row: &[f64], what: &str| -> Result<()> {
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{what} has a negative or non-finite entry"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOL {
                return Err(Error::InvalidArgument(format!("{what} sums to {sum}")));
            }
            Ok(())
        };
        for (i, row) in transitions.chunks(num_states).enumerate() {
            check(
                row,
                &format!("transition row ({}, {})", i / num_actions, i % num_actions),
            )?;
        }
        check(&initial, "initial distribution")?;
        Ok(TabularMdpSpec {
            num_states,
            num_actions,
            transitions,
            initial,
            gamma,
        })
    }

    /// `size × size` grid with actions up, down, left, right. With probability
    /// `slip` the move direction is drawn uniformly instead; moves into a wall
    /// leave the agent in place. Starts uniformly at random.
    pub fn gridworld(size: usize, slip: f64, gamma: f64) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidArgument("grid size must be positive".into()));
        }
        if !(0.0..=1.0).contains(&slip) {
            return Err(Error::InvalidArgument(format!("slip must lie in [0, 1], got {slip}")));
        }
        let n = size * size;
        let moves: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];
        let target = |s: usize, m: usize| -> usize {
            let (r, c) = ((s / size) as isize, (s % size) as isize);
            let (nr, nc) = (r + moves[m].0, c + moves[m].1);
            if nr < 0 || nc < 0 || nr >= size as isize || nc >= size as isize {
                s
            } else {
                nr as usize * size + nc as usize
            }
        };
        let mut p = vec![0.0; n * 4 * n];
        for s in 0..n {
            for a in 0..4 {
                let row = &mut p[(s * 4 + a) * n..(s * 4 + a + 1) * n];
                for (m, _) in moves.iter().enumerate() {
                    let w = if m == a { 1.0 - slip + slip / 4.0 } else { slip / 4.0 };
                    row[target(s, m)] += w;
                }
            }
        }
        Self::new(n, 4, p, vec![1.0 / n as f64; n], gamma)
    }

    /// Single state, `num_actions` actions, discount 0: the bandit setting.
    pub fn single_state(num_actions: usize) -> Result<Self> {
        Self::new(1, num_actions, vec![1.0; num_actions], vec![1.0], 0.0)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidArgument(format!("gamma must lie in [0, 1), got {gamma}")));
        }
        self.gamma = gamma;
        Ok(self)
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    /// `P(· | s, a)`.
    pub fn transition(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.num_actions + a) * self.num_states;
        &self.transitions[start..start + self.num_states]
    }

    pub(crate) fn check_policy(&self, pi: &TabularPolicy) -> Result<()> {
        if pi.num_states() != self.num_states {
            return Err(Error::LengthMismatch {
                expected: self.num_states,
                got: pi.num_states(),
            });
        }
        if pi.num_actions() != self.num_actions {
            return Err(Error::LengthMismatch {
                expected: self.num_actions,
                got: pi.num_actions(),
            });
        }
        Ok(())
    }

    /// State-to-state kernel `P_π(s, s') = Σ_a π(a|s) P(s'|s,a)`.
    pub fn policy_kernel(&self, pi: &TabularPolicy) -> Result<DMatrix<f64>> {
        self.check_policy(pi)?;
        let n = self.num_states;
        let mut k = DMatrix::<f64>::zeros(n, n);
        for s in 0..n {
            for (a, &pa) in pi.row(s).as_slice().iter().enumerate() {
                for (sn, &p) in self.transition(s, a).iter().enumerate() {
                    k[(s, sn)] += pa * p;
                }
            }
        }
        Ok(k)
    }
}

/// Samplers for every `(s, a)` successor distribution and every policy row.
struct Sampler {
    initial: WeightedIndex<f64>,
    next: Vec<WeightedIndex<f64>>,
    actions: Vec<WeightedIndex<f64>>,
    num_actions: usize,
}

impl Sampler {
    fn new(mdp: &TabularMdpSpec, pi: &TabularPolicy) -> Result<Self> {
        mdp.check_policy(pi)?;
        let w =
            |row: &[f64]| WeightedIndex::new(row.iter().copied()).map_err(|e| Error::InvalidArgument(e.to_string()));
        let mut next = Vec::with_capacity(mdp.num_states * mdp.num_actions);
        for s in 0..mdp.num_states {
            for a in 0..mdp.num_actions {
                next.push(w(mdp.transition(s, a))?);
            }
        }
        let actions = (0..mdp.num_states)
            .map(|s| w(pi.row(s).as_slice()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Sampler {
            initial: w(&mdp.initial)?,
            next,
            actions,
            num_actions: mdp.num_actions,
        })
    }

    fn step<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> (usize, usize) {
        let a = self.actions[s].sample(rng);
        (a, self.next[s * self.num_actions + a].sample(rng))
    }
}

/// Simulates `s_0, …, s_horizon` under `pi`.
pub fn rollout<R: Rng + ?Sized>(
    mdp: &TabularMdpSpec,
    pi: &TabularPolicy,
    horizon: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    Ok(rollout_with_actions(mdp, pi, horizon, rng)?.0)
}

/// Like [`rollout`] but also returns the `horizon` actions taken.
pub fn rollout_with_actions<R: Rng + ?Sized>(
    mdp: &TabularMdpSpec,
    pi: &TabularPolicy,
    horizon: usize,
    rng: &mut R,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let sampler = Sampler::new(mdp, pi)?;
    let mut states = Vec::with_capacity(horizon + 1);
    let mut actions = Vec::with_capacity(horizon);
    let mut s = sampler.initial.sample(rng);
    states.push(s);
    for _ in 0..horizon {
        let (a, sn) = sampler.step(s, rng);
        actions.push(a);
        states.push(sn);
        s = sn;
    }
    Ok((states, actions))
}

/// State frequencies of a chain that restarts from `μ0` with probability
/// `1 − γ` before every transition. Its stationary law is the discounted
/// visitation density.
pub fn empirical_visitation<R: Rng + ?Sized>(
    mdp: &TabularMdpSpec,
    pi: &TabularPolicy,
    steps: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let sampler = Sampler::new(mdp, pi)?;
    let mut counts = vec![0u64; mdp.num_states];
    let mut s = sampler.initial.sample(rng);
    for _ in 0..steps {
        counts[s] += 1;
        s = if rng.random::<f64>() < 1.0 - mdp.gamma {
            sampler.initial.sample(rng)
        } else {
            sampler.step(s, rng).1
        };
    }
    Ok(counts.into_iter().map(|c| c as f64 / steps as f64).collect())
}
