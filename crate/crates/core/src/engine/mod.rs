//! The mirror-descent IRL loop and its convergence diagnostics.

mod cost;
mod diagnostics;
mod record;
mod reward;
mod schedule;
mod tabular;
mod visitation;

pub use cost::{discounted_state_weights, regret, temporal_cost, truncation_horizon, RegretTracker, Round};
pub use diagnostics::{diagnose, diagnose_series, linear_fit, DiagnosticMode, DiagnosticReport, Metric, MIN_RECORDS};
pub use record::{read_records_csv, write_records_csv, RunRecord, CSV_COLUMNS};
pub use reward::{normalize_rewards, psi_lambda_reward, RewardNormalizer, DENSITY_FLOOR};
pub use schedule::StepSchedule;
pub use tabular::{
    dual_step_residual, exact_regularized_rl, md_step_tabular, md_step_tabular_detailed, mdairl_loss, mdairl_minimizer,
    reward_table, MdStep, TabularPolicy,
};
pub use visitation::{visitation_density, VisitationDensity};
