//! Configured, seeded experiment runs and their reports.

mod config;
mod run;
mod summary;
mod sweep;
mod verify;

pub use config::{BanditSection, ExperimentConfig, ExperimentKind, GaussianToySection, MdpSection, SweepSection};
pub use run::{
    baseline_csv_name, gaussian_toy_spec, gridworld_expert, run_experiment, run_seed, run_series, seed_csv_name,
    simulate, write_outputs, SeedRun, DIRECT_CHASE,
};
pub use summary::{summarize, summarize_output_dir, ResultSummary, SeedSummary, Stat};
pub use sweep::{schedule_sweep, SweepCell, SweepTable};
pub use verify::{
    verify_mirror_map, verify_suite, verify_suite_with, CheckResult, VerifyReport, DEFAULT_INSTANCES, IDENTITY_TOL,
};
