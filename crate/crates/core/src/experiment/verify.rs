use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentKind};
use crate::bregman::{MirrorMap, ProbVector, Regularizer, EPS_MIN};
use crate::engine::{visitation_density, StepSchedule, TabularPolicy};
use crate::env::TabularMdpSpec;
use crate::error::{Error, Result};
use crate::gaussian::{from_natural, natural_params, GaussianPolicyParams, LdlCovariance};
use crate::parallel::Execution;

pub const IDENTITY_TOL: f64 = 1e-8;
pub const DEFAULT_INSTANCES: usize = 1000;
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub subject: String,
    pub instances: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Unasserted checks are reported but never fail the suite.
    pub asserted: bool,
}

impl CheckResult {
    fn new(name: &str, subject: &str, instances: usize, max_residual: f64, tolerance: f64, asserted: bool) -> Self {
        CheckResult {
            name: name.into(),
            subject: subject.into(),
            instances,
            max_residual,
            tolerance,
            passed: max_residual < tolerance,
            asserted,
        }
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = match (self.passed, self.asserted) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "WARN",
        };
        write!(
            f,
            "{status} {}[{}] n={} max_residual={:.3e} tol={:.0e}",
            self.name, self.subject, self.instances, self.max_residual, self.tolerance
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || !c.asserted)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| c.asserted && !c.passed)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        let failed = self.failures().count();
        write!(f, "{} checks, {} failed", self.checks.len(), failed)
    }
}

fn random_point<R: Rng>(n: usize, spread: f64, rng: &mut R) -> ProbVector {
    let w: Vec<f64> = (0..n)
        .map(|_| (spread * rng.sample::<f64, _>(StandardNormal)).exp())
        .collect();
    ProbVector::from_weights(&w).expect("positive weights")
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Three-point, two-point, reward round-trip, shift-invariance,
/// nonnegativity and dual-step checks for one mirror map.
pub fn verify_mirror_map<M: MirrorMap + ?Sized>(
    subject: &str,
    map: &M,
    instances: usize,
    seed: u64,
    asserted: bool,
) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut three, mut two, mut trip, mut shift, mut neg, mut dual) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut dual_count = 0;
    let limit = map.convex_limit();
    for _ in 0..instances {
        let n = rng.random_range(2..=10);
        let x = random_point(n, 1.0, &mut rng);
        let y = random_point(n, 1.0, &mut rng);
        let z = random_point(n, 1.0, &mut rng);
        let (xs, ys, zs) = (x.as_slice(), y.as_slice(), z.as_slice());
        let (gx, gy, gz) = (map.grad_omega(xs), map.grad_omega(ys), map.grad_omega(zs));

        let lhs = map.bregman_div(xs, zs);
        let rhs = map.bregman_div(xs, ys) + map.bregman_div(ys, zs) + dot(&sub(&gy, &gz), &sub(xs, ys));
        three = three.max((lhs - rhs).abs());

        let sym = map.bregman_div(xs, ys) + map.bregman_div(ys, xs);
        two = two.max((sym - dot(&sub(&gx, &gy), &sub(xs, ys))).abs());

        neg = neg.max(-map.bregman_div(xs, ys)).max(0.0);

        trip = trip.max(match map.grad_omega_star(&map.reward_psi(xs)) {
            Ok(back) => max_abs_diff(&back, xs),
            Err(_) => f64::INFINITY,
        });

        let dual_vec: Vec<f64> = (0..n).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let c = 10.0 * rng.sample::<f64, _>(StandardNormal);
        let shifted: Vec<f64> = dual_vec.iter().map(|v| v + c).collect();
        shift = shift.max(match (map.grad_omega_star(&dual_vec), map.grad_omega_star(&shifted)) {
            (Ok(a), Ok(b)) => max_abs_diff(&a, &b),
            (Err(_), Err(_)) => 0.0,
            _ => f64::INFINITY,
        });

        let eta = rng.random_range(0.05..0.95);
        let target: Vec<f64> = gy.iter().zip(&gx).map(|(b, c)| eta * b + (1.0 - eta) * c).collect();
        if let Ok(next) = map.grad_omega_star(&target) {
            let upper = x.upper_bound().min(limit.unwrap_or(f64::INFINITY));
            let interior = next
                .iter()
                .all(|&v| v > EPS_MIN * (1.0 + 1e-9) && v < upper * (1.0 - 1e-9));
            if interior {
                let gn = map.grad_omega(&next);
                let r: Vec<f64> = (0..n).map(|a| eta * (gx[a] - gy[a]) - (gx[a] - gn[a])).collect();
                let mean = r.iter().sum::<f64>() / n as f64;
                dual = r.iter().map(|v| (v - mean).abs()).fold(dual, f64::max);
                dual_count += 1;
            }
        }
    }
    vec![
        CheckResult::new(
            "three_point_identity",
            subject,
            instances,
            three,
            IDENTITY_TOL,
            asserted,
        ),
        CheckResult::new("two_point_identity", subject, instances, two, IDENTITY_TOL, asserted),
        CheckResult::new("reward_round_trip", subject, instances, trip, IDENTITY_TOL, asserted),
        CheckResult::new("shift_invariance", subject, instances, shift, IDENTITY_TOL, asserted),
        CheckResult::new("divergence_nonnegative", subject, instances, neg, 1e-12, asserted),
        CheckResult::new("dual_step_identity", subject, dual_count, dual, IDENTITY_TOL, asserted),
    ]
}

fn random_gaussian<R: Rng>(d: usize, rng: &mut R) -> GaussianPolicyParams {
    let lower = (0..d * (d - 1) / 2)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let log_sigma = (0..d).map(|_| rng.random_range(-1.5..0.5)).collect();
    let mean = (0..d).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
    GaussianPolicyParams::new(mean, LdlCovariance::new(lower, log_sigma).expect("valid factors")).expect("valid")
}

fn gaussian_checks(instances: usize, seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut ldl, mut inv, mut nat) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..instances {
        let d = rng.random_range(1..=6);
        let g = random_gaussian(d, &mut rng);
        let sigma = g.cov.compose();
        ldl = ldl.max(match LdlCovariance::decompose(&sigma) {
            Ok(back) => (back.compose() - &sigma).amax(),
            Err(_) => f64::INFINITY,
        });
        let eye = nalgebra::DMatrix::<f64>::identity(d, d);
        inv = inv.max((g.cov.invert() * &sigma - eye).amax());
        nat = nat.max(match from_natural(&natural_params(&g)) {
            Ok(back) => max_abs_diff(&back.mean, &g.mean).max((back.cov.compose() - &sigma).amax()),
            Err(_) => f64::INFINITY,
        });
    }
    vec![
        CheckResult::new("ldl_round_trip", "gaussian", instances, ldl, 1e-9, true),
        CheckResult::new("ldl_inverse", "gaussian", instances, inv, 1e-9, true),
        CheckResult::new("natural_round_trip", "gaussian", instances, nat, 1e-8, true),
    ]
}

fn engine_checks(instances: usize, seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mdp = TabularMdpSpec::gridworld(4, 0.2, 0.9).expect("valid gridworld");
    let mut mass = 0.0f64;
    for _ in 0..instances {
        let rows = (0..mdp.num_states()).map(|_| random_point(4, 1.0, &mut rng)).collect();
        let pi = TabularPolicy::new(rows).expect("same widths");
        mass = mass.max(match visitation_density(&mdp, &pi, mdp.gamma()) {
            Ok(rho) => (rho.rho.iter().sum::<f64>() - 1.0).abs(),
            Err(_) => f64::INFINITY,
        });
    }
    let mut config = 0.0f64;
    for kind in ExperimentKind::ALL {
        let c = ExperimentConfig::defaults(kind);
        let same = c
            .to_toml_string()
            .ok()
            .and_then(|s| ExperimentConfig::from_toml_str(&s).ok())
            == Some(c);
        config = config.max(if same { 0.0 } else { 1.0 });
    }
    let mut sched = 0.0f64;
    for s in ["constant:0.2", "harmonic:4", "power:1,2", "linear_alpha:0.5,2,300"] {
        let p: Option<StepSchedule> = s.parse().ok();
        let back = p.and_then(|p| p.to_string().parse::<StepSchedule>().ok().filter(|b| *b == p));
        sched = sched.max(if back.is_some() { 0.0 } else { 1.0 });
    }
    vec![
        CheckResult::new("visitation_normalized", "gridworld", instances, mass, 1e-10, true),
        CheckResult::new(
            "config_round_trip",
            "config",
            ExperimentKind::ALL.len(),
            config,
            0.5,
            true,
        ),
        CheckResult::new("schedule_round_trip", "schedule", 4, sched, 0.5, true),
    ]
}

/// Every property check with fixed seeds. The sin kernel is reported
/// without being asserted.
pub fn verify_suite(exec: Execution) -> VerifyReport {
    verify_suite_with(DEFAULT_INSTANCES, DEFAULT_SEED, exec)
}

pub fn verify_suite_with(instances: usize, seed: u64, exec: Execution) -> VerifyReport {
    let mut subjects: Vec<(Regularizer, bool)> = vec![
        (Regularizer::Shannon, true),
        (Regularizer::Tsallis { q: 1.5, k: 1.0 }, true),
        (Regularizer::Tsallis { q: 2.0, k: 1.0 }, true),
        (Regularizer::Exp, true),
        (Regularizer::Cos, true),
    ];
    subjects.push((Regularizer::Sin, false));
    let jobs: Vec<usize> = (0..subjects.len() + 2).collect();
    let groups = exec.map(jobs, |i| match i.checked_sub(subjects.len()) {
        None => {
            let (reg, asserted) = subjects[i];
            verify_mirror_map(&reg.to_string(), &reg, instances, seed.wrapping_add(i as u64), asserted)
        }
        Some(0) => gaussian_checks(instances.min(200), seed ^ 0x6a09),
        Some(_) => engine_checks(instances.min(200), seed ^ 0xbb67),
    });
    VerifyReport {
        checks: groups.into_iter().flatten().collect(),
    }
}
