//! Full-covariance Gaussian policies as an exponential family.

mod family;
mod ldl;
mod step;

pub use family::{
    bregman_div_gaussian, from_natural, interaction_integral, kl_gaussian, log_partition, natural_params,
    power_integral, psi_gaussian, sample_action, shannon_entropy_gaussian, tsallis_entropy_gaussian,
    GaussianPolicyParams, NaturalParams,
};
pub use ldl::{LdlCovariance, SIGMA_MAX, SIGMA_MIN};
pub use step::{md_update_gaussian, step_objective, tsallis_divergence_gradient, tsallis_step, TsallisStep};
