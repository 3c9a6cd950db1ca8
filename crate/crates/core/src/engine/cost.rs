use super::TabularPolicy;
use crate::bregman::{grad_omega_star, DualVector, ProbVector, Regularizer};
use crate::error::{Error, Result};

/// Truncation length `H = ⌈ln(1e-6)/ln γ⌉` for discounted sums (`H = 1` at γ = 0).
pub fn truncation_horizon(gamma: f64) -> usize {
    if gamma <= 0.0 {
        1
    } else {
        (1e-6f64.ln() / gamma.ln()).ceil().max(1.0) as usize
    }
}

/// Discounted state weights `w(s) = Σ_i γ^i 1{s_i = s}` over the truncated trajectory.
pub fn discounted_state_weights(tau: &[usize], gamma: f64, num_states: usize) -> Result<Vec<f64>> {
    let mut w = vec![0.0; num_states];
    let mut g = 1.0;
    for &s in tau.iter().take(truncation_horizon(gamma)) {
        let slot = w
            .get_mut(s)
            .ok_or_else(|| Error::InvalidArgument(format!("state {s} out of range for {num_states} states")))?;
        *slot += g;
        g *= gamma;
    }
    Ok(w)
}

/// `f(π, τ) = Σ_i γ^i D_Ω(π(·|s_i) ‖ π̄(·|s_i))`.
pub fn temporal_cost(
    pi: &TabularPolicy,
    pi_bar: &TabularPolicy,
    tau: &[usize],
    gamma: f64,
    reg: &Regularizer,
) -> Result<f64> {
    pi.check_same_shape(pi_bar)?;
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!("gamma must lie in [0, 1), got {gamma}")));
    }
    let w = discounted_state_weights(tau, gamma, pi.num_states())?;
    let mut cost = 0.0;
    for (s, ws) in w.iter().enumerate() {
        if *ws > 0.0 {
            cost += ws * reg.divergence(pi.row(s).as_slice(), pi_bar.row(s).as_slice());
        }
    }
    Ok(cost)
}

/// One round of the online problem: the learner's policy, the round's
/// reference estimate and the trajectory that samples the cost.
#[derive(Debug, Clone)]
pub struct Round {
    pub policy: TabularPolicy,
    pub reference: TabularPolicy,
    pub trajectory: Vec<usize>,
}

/// Average regret `(1/t) Σ f(π_i, τ_i) − inf_π (1/t) Σ f(π, τ_i)`.
///
/// Without an explicit comparator the infimum is attained in closed form by
/// the per-state dual average of `∇Ω(π̄_i)` weighted by discounted visits.
pub fn regret(history: &[Round], reg: &Regularizer, gamma: f64, comparator: Option<&TabularPolicy>) -> Result<f64> {
    let Some(first) = history.first() else {
        return Err(Error::InvalidArgument("regret needs a nonempty history".into()));
    };
    let mut tracker = RegretTracker::new(first.policy.num_states(), first.policy.num_actions(), *reg, gamma);
    for r in history {
        tracker.push(&r.policy, &r.reference, &r.trajectory)?;
    }
    match comparator {
        Some(c) => tracker.regret_against(c),
        None => tracker.regret(),
    }
}

/// Incremental regret against the best fixed policy in hindsight.
///
/// Keeps per-state sufficient statistics so each update and comparator
/// evaluation costs `O(S·A)`.
#[derive(Debug, Clone)]
pub struct RegretTracker {
    reg: Regularizer,
    gamma: f64,
    rounds: usize,
    realized: f64,
    weight: Vec<f64>,
    dual_sum: Vec<Vec<f64>>,
    /// `Σ_j w_j (Ω(π̄_j) − ⟨∇Ω(π̄_j), π̄_j⟩)` per state.
    offset: Vec<f64>,
    num_actions: usize,
}

impl RegretTracker {
    pub fn new(num_states: usize, num_actions: usize, reg: Regularizer, gamma: f64) -> Self {
        RegretTracker {
            reg,
            gamma,
            rounds: 0,
            realized: 0.0,
            weight: vec![0.0; num_states],
            dual_sum: vec![vec![0.0; num_actions]; num_states],
            offset: vec![0.0; num_states],
            num_actions,
        }
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// Adds round `t` and returns its realized cost `f(π_t, τ_t)`.
    pub fn push(&mut self, policy: &TabularPolicy, reference: &TabularPolicy, trajectory: &[usize]) -> Result<f64> {
        if policy.num_states() != self.weight.len() || policy.num_actions() != self.num_actions {
            return Err(Error::LengthMismatch {
                expected: self.weight.len() * self.num_actions,
                got: policy.num_states() * policy.num_actions(),
            });
        }
        let cost = temporal_cost(policy, reference, trajectory, self.gamma, &self.reg)?;
        let w = discounted_state_weights(trajectory, self.gamma, self.weight.len())?;
        for (s, &ws) in w.iter().enumerate() {
            if ws == 0.0 {
                continue;
            }
            let bar = reference.row(s).as_slice();
            let grad = self.reg.gradient(bar);
            let inner: f64 = grad.iter().zip(bar).map(|(g, p)| g * p).sum();
            self.offset[s] += ws * (self.reg.value(bar) - inner);
            for (acc, g) in self.dual_sum[s].iter_mut().zip(&grad) {
                *acc += ws * g;
            }
            self.weight[s] += ws;
        }
        self.realized += cost;
        self.rounds += 1;
        Ok(cost)
    }

    /// The minimizer of the accumulated cost; unvisited states are uniform.
    pub fn comparator(&self) -> Result<TabularPolicy> {
        let rows = self
            .weight
            .iter()
            .zip(&self.dual_sum)
            .map(|(&w, y)| {
                if w > 0.0 {
                    grad_omega_star(&DualVector::new(y.iter().map(|v| v / w).collect())?, &self.reg)
                } else {
                    Ok(ProbVector::uniform(self.num_actions))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        TabularPolicy::new(rows)
    }

    /// Accumulated cost `Σ_j f(π, τ_j)` of a fixed policy.
    pub fn cumulative_cost(&self, pi: &TabularPolicy) -> Result<f64> {
        let mut total = 0.0;
        for (s, &w) in self.weight.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let p = pi.row(s).as_slice();
            let lin: f64 = self.dual_sum[s].iter().zip(p).map(|(y, x)| y * x).sum();
            total += w * self.reg.value(p) - lin - self.offset[s];
        }
        Ok(total)
    }

    pub fn average_realized(&self) -> f64 {
        if self.rounds == 0 {
            0.0
        } else {
            self.realized / self.rounds as f64
        }
    }

    pub fn regret_against(&self, pi: &TabularPolicy) -> Result<f64> {
        if self.rounds == 0 {
            return Err(Error::InvalidArgument("regret needs at least one round".into()));
        }
        Ok((self.realized - self.cumulative_cost(pi)?) / self.rounds as f64)
    }

    pub fn regret(&self) -> Result<f64> {
        self.regret_against(&self.comparator()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn single(v: &[f64]) -> TabularPolicy {
        TabularPolicy::new(vec![ProbVector::new(v.to_vec()).unwrap()]).unwrap()
    }

    #[test]
    fn horizon_values() {
        assert_eq!(truncation_horizon(0.0), 1);
        assert_eq!(truncation_horizon(0.5), 20);
        assert_eq!(truncation_horizon(0.9), 132);
    }

    #[test]
    fn geometric_series_example() {
        // per-state divergence 0.1 under Tsallis q=2 means Σ(p−q)² = 0.1
        let d = (0.05f64).sqrt();
        let p = single(&[0.5 + d, 0.5 - d]);
        let q = single(&[0.5, 0.5]);
        let reg = Regularizer::Tsallis { q: 2.0, k: 1.0 };
        let tau = vec![0; 200];
        let c = temporal_cost(&p, &q, &tau, 0.5, &reg).unwrap();
        assert_abs_diff_eq!(c, 0.2, epsilon = 1e-6);
        let c0 = temporal_cost(&p, &q, &tau, 0.0, &reg).unwrap();
        assert_abs_diff_eq!(c0, 0.1, epsilon = 1e-12);
        assert_eq!(temporal_cost(&q, &q, &tau, 0.5, &reg).unwrap(), 0.0);
    }

    #[test]
    fn tracker_cost_matches_direct_sum() {
        let reg = Regularizer::Shannon;
        let refs = [single(&[0.7, 0.3]), single(&[0.4, 0.6]), single(&[0.5, 0.5])];
        let mut tr = RegretTracker::new(1, 2, reg, 0.0);
        for r in &refs {
            tr.push(&single(&[0.5, 0.5]), r, &[0]).unwrap();
        }
        let probe = single(&[0.2, 0.8]);
        let direct: f64 = refs
            .iter()
            .map(|r| temporal_cost(&probe, r, &[0], 0.0, &reg).unwrap())
            .sum();
        assert_abs_diff_eq!(tr.cumulative_cost(&probe).unwrap(), direct, epsilon = 1e-12);
    }

    #[test]
    fn regret_zero_when_playing_comparator() {
        let reg = Regularizer::Shannon;
        let c = single(&[0.6, 0.4]);
        let rounds: Vec<Round> = (0..5)
            .map(|_| Round {
                policy: c.clone(),
                reference: c.clone(),
                trajectory: vec![0],
            })
            .collect();
        assert_abs_diff_eq!(regret(&rounds, &reg, 0.0, None).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(regret(&rounds, &reg, 0.0, Some(&c)).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn single_round_regret_nonnegative() {
        let reg = Regularizer::Tsallis { q: 1.5, k: 1.0 };
        let r = Round {
            policy: single(&[0.1, 0.9]),
            reference: single(&[0.5, 0.5]),
            trajectory: vec![0],
        };
        assert!(regret(&[r], &reg, 0.0, None).unwrap() >= 0.0);
    }
}
