use crate::bregman::{bregman_div, bregman_project, grad_omega_star_detailed, DualVector, ProbVector, Regularizer};
use crate::error::{Error, Result};

/// One distribution over actions per state.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    rows: Vec<ProbVector>,
}

impl TabularPolicy {
    pub fn new(rows: Vec<ProbVector>) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::InvalidArgument("policy needs at least one state".into()));
        };
        let a = first.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != a) {
            return Err(Error::LengthMismatch {
                expected: a,
                got: bad.len(),
            });
        }
        Ok(TabularPolicy { rows })
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        TabularPolicy {
            rows: vec![ProbVector::uniform(num_actions); num_states],
        }
    }

    pub fn num_states(&self) -> usize {
        self.rows.len()
    }

    pub fn num_actions(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, s: usize) -> &ProbVector {
        &self.rows[s]
    }

    pub fn rows(&self) -> &[ProbVector] {
        &self.rows
    }

    pub fn set_row(&mut self, s: usize, row: ProbVector) -> Result<()> {
        if row.len() != self.num_actions() {
            return Err(Error::LengthMismatch {
                expected: self.num_actions(),
                got: row.len(),
            });
        }
        self.rows[s] = row;
        Ok(())
    }

    pub fn into_rows(self) -> Vec<ProbVector> {
        self.rows
    }

    pub(crate) fn check_same_shape(&self, other: &TabularPolicy) -> Result<()> {
        if self.num_states() != other.num_states() {
            return Err(Error::LengthMismatch {
                expected: self.num_states(),
                got: other.num_states(),
            });
        }
        if self.num_actions() != other.num_actions() {
            return Err(Error::LengthMismatch {
                expected: self.num_actions(),
                got: other.num_actions(),
            });
        }
        Ok(())
    }
}

/// Outcome of a tabular mirror-descent step.
#[derive(Debug, Clone, PartialEq)]
pub struct MdStep {
    pub policy: TabularPolicy,
    /// Some coordinate landed on the clamp boundary.
    pub clamped: bool,
    /// Dual extrapolation failed and the primal point was projected instead.
    pub projected: bool,
}

/// `∇Ω(π_{t+1}) = η ∇Ω(π̄) + (1 − η) ∇Ω(π_t)` per state, mapped back by `∇Ω*`.
pub fn md_step_tabular(
    pi_t: &TabularPolicy,
    pi_bar: &TabularPolicy,
    eta: f64,
    reg: &Regularizer,
) -> Result<TabularPolicy> {
    Ok(md_step_tabular_detailed(pi_t, pi_bar, eta, reg)?.policy)
}

pub fn md_step_tabular_detailed(
    pi_t: &TabularPolicy,
    pi_bar: &TabularPolicy,
    eta: f64,
    reg: &Regularizer,
) -> Result<MdStep> {
    pi_t.check_same_shape(pi_bar)?;
    if !eta.is_finite() || eta < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "step size must be finite and nonnegative, got {eta}"
        )));
    }
    let mut rows = Vec::with_capacity(pi_t.num_states());
    let (mut clamped, mut projected) = (false, false);
    for (cur, bar) in pi_t.rows().iter().zip(pi_bar.rows()) {
        let y: Vec<f64> = reg
            .gradient(cur.as_slice())
            .into_iter()
            .zip(reg.gradient(bar.as_slice()))
            .map(|(gc, gb)| eta * gb + (1.0 - eta) * gc)
            .collect();
        match DualVector::new(y).and_then(|y| grad_omega_star_detailed(&y, reg)) {
            Ok(sol) => {
                clamped |= sol.clamped;
                rows.push(sol.policy);
            }
            Err(Error::NonConvexRegion { .. } | Error::NonFinite { .. }) => {
                let x: Vec<f64> = cur
                    .as_slice()
                    .iter()
                    .zip(bar.as_slice())
                    .map(|(c, b)| (1.0 - eta) * c + eta * b)
                    .collect();
                rows.push(bregman_project(&x, reg)?);
                projected = true;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(MdStep {
        policy: TabularPolicy { rows },
        clamped,
        projected,
    })
}

/// Largest deviation from `η(∇Ω(π_t) − ∇Ω(π̄)) = ∇Ω(π_t) − ∇Ω(π_{t+1})`
/// over states, after removing the per-state constant offset that the
/// simplex multiplier introduces.
pub fn dual_step_residual(
    pi_t: &TabularPolicy,
    pi_bar: &TabularPolicy,
    pi_next: &TabularPolicy,
    eta: f64,
    reg: &Regularizer,
) -> Result<f64> {
    pi_t.check_same_shape(pi_bar)?;
    pi_t.check_same_shape(pi_next)?;
    let mut worst: f64 = 0.0;
    for s in 0..pi_t.num_states() {
        let gt = reg.gradient(pi_t.row(s).as_slice());
        let gb = reg.gradient(pi_bar.row(s).as_slice());
        let gn = reg.gradient(pi_next.row(s).as_slice());
        let r: Vec<f64> = (0..gt.len()).map(|a| eta * (gt[a] - gb[a]) - (gt[a] - gn[a])).collect();
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        worst = r.iter().map(|v| (v - mean).abs()).fold(worst, f64::max);
    }
    Ok(worst)
}

/// `E_{s∼w}[η D(π_φ ‖ π_ν) + (1 − η) D(π_φ ‖ π_θ)]`.
pub fn mdairl_loss(
    pi_phi: &TabularPolicy,
    pi_nu: &TabularPolicy,
    pi_theta: &TabularPolicy,
    eta: f64,
    state_weights: &[f64],
    reg: &Regularizer,
) -> Result<f64> {
    pi_phi.check_same_shape(pi_nu)?;
    pi_phi.check_same_shape(pi_theta)?;
    if state_weights.len() != pi_phi.num_states() {
        return Err(Error::LengthMismatch {
            expected: pi_phi.num_states(),
            got: state_weights.len(),
        });
    }
    if state_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidArgument(
            "state weights must be finite and nonnegative".into(),
        ));
    }
    let total: f64 = state_weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized { sum: total });
    }
    let mut loss = 0.0;
    for (s, &w) in state_weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let phi = pi_phi.row(s);
        loss +=
            w * (eta * bregman_div(phi, pi_nu.row(s), reg)? + (1.0 - eta) * bregman_div(phi, pi_theta.row(s), reg)?);
    }
    Ok(loss)
}

/// Exact minimizer of [`mdairl_loss`] over `π_φ`, identical in every state
/// with positive weight.
pub fn mdairl_minimizer(
    pi_nu: &TabularPolicy,
    pi_theta: &TabularPolicy,
    eta: f64,
    reg: &Regularizer,
) -> Result<TabularPolicy> {
    md_step_tabular(pi_theta, pi_nu, eta, reg)
}

/// Per-state `∇Ω*(ψ(s, ·))`: the regularized-RL optimum for a myopic reward.
pub fn exact_regularized_rl(psi: &[DualVector], reg: &Regularizer) -> Result<TabularPolicy> {
    let rows = psi
        .iter()
        .map(|y| crate::bregman::grad_omega_star(y, reg))
        .collect::<Result<Vec<_>>>()?;
    TabularPolicy::new(rows)
}

/// Per-state `Ψ_Ω(π)`.
pub fn reward_table(pi: &TabularPolicy, reg: &Regularizer) -> Result<Vec<DualVector>> {
    pi.rows()
        .iter()
        .map(|p| crate::bregman::reward_operator_psi(p, reg))
        .collect()
}
