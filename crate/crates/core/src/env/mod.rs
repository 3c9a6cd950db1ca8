//! Problem generators and expert-estimation processes.

mod bandit;
mod gaussian_toy;
mod mdp;
mod noise;

pub use bandit::{
    fit_reference_counts, fit_reference_discrete, sample_categorical, sample_expert_bandit, softmax, BanditSpec,
};
pub use gaussian_toy::{fit_reference_gaussian, GaussianToySpec};
pub use mdp::{empirical_visitation, rollout, rollout_with_actions, TabularMdpSpec};
pub use noise::{corrupt_demos, corrupt_discrete, write_demos_csv, NoiseSpec};
