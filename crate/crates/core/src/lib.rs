//! Mirror-descent inverse reinforcement learning.
//!
//! Bregman geometry over finite and Gaussian policy spaces, the mirror-descent
//! IRL update with step-size schedules, convergence diagnostics, and
//! reproducible experiments on bandits, tabular MDPs and Gaussian policies.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bregman;
pub mod engine;
pub mod env;
pub mod error;
pub mod experiment;
pub mod gaussian;
pub mod parallel;

pub use error::{Error, Result};
pub use parallel::Execution;
