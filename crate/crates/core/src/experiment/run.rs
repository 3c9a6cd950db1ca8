use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::{ExperimentConfig, ExperimentKind};
use super::summary::{summarize, ResultSummary};
use crate::bregman::{DualVector, ProbVector, Regularizer};
use crate::engine::{
    exact_regularized_rl, md_step_tabular_detailed, mdairl_loss, psi_lambda_reward, reward_table, visitation_density,
    write_records_csv, RegretTracker, RunRecord, StepSchedule, TabularPolicy,
};
use crate::env::{
    corrupt_demos, corrupt_discrete, fit_reference_counts, fit_reference_discrete, fit_reference_gaussian,
    rollout_with_actions, sample_expert_bandit, softmax, BanditSpec, GaussianToySpec, NoiseSpec, TabularMdpSpec,
};
use crate::error::{Error, Result};
use crate::gaussian::{
    bregman_div_gaussian, from_natural, md_update_gaussian, natural_params, sample_action, GaussianPolicyParams,
    LdlCovariance, NaturalParams,
};
use crate::parallel::Execution;

/// Time series of one seed, plus the direct-chase baseline when requested.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub records: Vec<RunRecord>,
    pub baseline: Option<Vec<RunRecord>>,
}

/// The schedule of the `η ≡ 1` baseline, which copies the reference each round.
pub const DIRECT_CHASE: StepSchedule = StepSchedule::Constant { eta: 1.0 };

/// Runs every seed of `cfg` and returns them sorted by seed.
pub fn simulate(cfg: &ExperimentConfig, exec: Execution) -> Result<Vec<SeedRun>> {
    cfg.validate()?;
    let mut seeds = cfg.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    exec.map(seeds, |seed| run_seed(cfg, seed)).into_iter().collect()
}

pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedRun> {
    let schedule = cfg.bound_schedule();
    let records = run_series(cfg, &cfg.regularizer, &schedule, seed)?;
    let baseline = if cfg.baseline {
        Some(run_series(cfg, &cfg.regularizer, &DIRECT_CHASE, seed)?)
    } else {
        None
    };
    Ok(SeedRun {
        seed,
        records,
        baseline,
    })
}

/// One seeded run with an explicit regularizer and schedule.
pub fn run_series(
    cfg: &ExperimentConfig,
    reg: &Regularizer,
    schedule: &StepSchedule,
    seed: u64,
) -> Result<Vec<RunRecord>> {
    match cfg.experiment {
        ExperimentKind::Bandit => run_bandit(cfg, reg, schedule, seed),
        ExperimentKind::GaussianToy | ExperimentKind::ScheduleSweep => run_gaussian_toy(cfg, reg, schedule, seed),
        ExperimentKind::Mdp => run_mdp(cfg, reg, schedule, seed),
        ExperimentKind::Verify => Err(Error::InvalidArgument("verify has no time series".into())),
    }
}

/// Simulates, summarizes and, if `output_dir` is set, writes one CSV per
/// seed (and per baseline seed) plus `summary.json`.
pub fn run_experiment(cfg: &ExperimentConfig, exec: Execution) -> Result<ResultSummary> {
    if matches!(cfg.experiment, ExperimentKind::ScheduleSweep | ExperimentKind::Verify) {
        return Err(Error::InvalidArgument(format!(
            "`{}` is not a time-series experiment",
            cfg.experiment
        )));
    }
    let runs = simulate(cfg, exec)?;
    let summary = summarize(cfg, &runs)?;
    if let Some(dir) = &cfg.output_dir {
        write_outputs(dir, cfg, &runs, &summary)?;
    }
    Ok(summary)
}

pub fn seed_csv_name(seed: u64) -> String {
    format!("seed_{seed}.csv")
}

pub fn baseline_csv_name(seed: u64) -> String {
    format!("baseline_seed_{seed}.csv")
}

pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, runs: &[SeedRun], summary: &ResultSummary) -> Result<()> {
    fs::create_dir_all(dir)?;
    for run in runs {
        write_records_csv(fs::File::create(dir.join(seed_csv_name(run.seed)))?, &run.records)?;
        if let Some(b) = &run.baseline {
            write_records_csv(fs::File::create(dir.join(baseline_csv_name(run.seed)))?, b)?;
        }
    }
    fs::write(dir.join("config.toml"), cfg.to_toml_string()?)?;
    fs::write(dir.join("summary.json"), summary.to_json()? + "\n")?;
    Ok(())
}

fn run_bandit(cfg: &ExperimentConfig, reg: &Regularizer, schedule: &StepSchedule, seed: u64) -> Result<Vec<RunRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = cfg.bandit.num_actions;
    let logits = (0..a).map(|_| rng.sample(StandardNormal)).collect();
    let spec = BanditSpec::new(
        logits,
        cfg.samples_per_round,
        cfg.bandit.smoothing,
        cfg.bandit.reference_lr,
    )?;
    let expert = spec.expert_policy()?;
    let noise = NoiseSpec::new(cfg.noise_epsilon)?;
    let mut pi = TabularPolicy::uniform(1, a);
    let mut bar = ProbVector::uniform(a);
    let mut tracker = RegretTracker::new(1, a, *reg, 0.0);
    let mut records = Vec::with_capacity(cfg.total_steps);
    for t in 1..=cfg.total_steps {
        let eta = schedule.eta(t)?;
        let batch = sample_expert_bandit(&spec, &mut rng)?;
        let batch = corrupt_discrete(&batch, a, noise, &mut rng);
        bar = fit_reference_discrete(&bar, &batch, &spec)?;
        let bar_t = TabularPolicy::new(vec![bar.clone()])?;
        tracker.push(&pi, &bar_t, &[0])?;
        let step = md_step_tabular_detailed(&pi, &bar_t, eta, reg)?;
        pi = step.policy;
        let mut r = RunRecord::new(t, eta);
        r.d_agent_expert = reg.divergence(pi.row(0).as_slice(), expert.as_slice());
        r.d_ref_expert = reg.divergence(bar.as_slice(), expert.as_slice());
        r.regret = tracker.regret().unwrap_or(f64::NAN);
        r.clamped_flag = step.clamped || step.projected;
        records.push(r);
    }
    Ok(records)
}

/// The toy's expert and starting policy as configured.
pub fn gaussian_toy_spec(cfg: &ExperimentConfig) -> Result<GaussianToySpec> {
    let toy = &cfg.gaussian_toy;
    let cov = LdlCovariance::from_sigma(toy.expert_lower.clone(), &toy.expert_sigma)?;
    let expert = GaussianPolicyParams::new(toy.expert_mean.clone(), cov)?;
    let d = expert.dim();
    GaussianToySpec::new(
        expert,
        GaussianPolicyParams::standard(d),
        toy.reference_lr,
        cfg.samples_per_round.max(2),
    )
}

fn run_gaussian_toy(
    cfg: &ExperimentConfig,
    reg: &Regularizer,
    schedule: &StepSchedule,
    seed: u64,
) -> Result<Vec<RunRecord>> {
    let spec = gaussian_toy_spec(cfg)?;
    let noise = NoiseSpec::new(cfg.noise_epsilon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pi = spec.agent_init.clone();
    let mut bar = spec.agent_init.clone();
    let mut history: Vec<GaussianPolicyParams> = Vec::with_capacity(cfg.total_steps);
    let mut natural_sum: Option<NaturalParams> = None;
    let mut realized = 0.0;
    let mut records = Vec::with_capacity(cfg.total_steps);
    for t in 1..=cfg.total_steps {
        let eta = schedule.eta(t)?;
        let batch: Vec<Vec<f64>> = (0..spec.batch_size)
            .map(|_| sample_action(&spec.expert, &mut rng))
            .collect();
        let batch = corrupt_demos(&batch, noise, &mut rng);
        bar = fit_reference_gaussian(&bar, &batch, spec.reference_lr)?;
        realized += bregman_div_gaussian(&pi, &bar, reg)?;
        let theta = natural_params(&bar);
        natural_sum = Some(match natural_sum {
            None => theta,
            Some(s) => s.combine(1.0, &theta, 1.0),
        });
        history.push(bar.clone());
        pi = md_update_gaussian(&pi, &bar, eta, reg)?;

        let mut r = RunRecord::new(t, eta);
        r.d_agent_expert = bregman_div_gaussian(&pi, &spec.expert, reg)?;
        r.d_ref_expert = bregman_div_gaussian(&bar, &spec.expert, reg)?;
        r.regret = gaussian_regret(natural_sum.as_ref().expect("set above"), &history, realized, reg);
        records.push(r);
    }
    Ok(records)
}

/// Average regret against the natural-parameter mean of the references,
/// which is the exact hindsight minimizer under Shannon geometry.
fn gaussian_regret(
    natural_sum: &NaturalParams,
    history: &[GaussianPolicyParams],
    realized: f64,
    reg: &Regularizer,
) -> f64 {
    let n = history.len() as f64;
    let comparator = match from_natural(&natural_sum.combine(1.0 / n, natural_sum, 0.0)) {
        Ok(c) => c,
        Err(_) => return f64::NAN,
    };
    let mut fixed = 0.0;
    for h in history {
        match bregman_div_gaussian(&comparator, h, reg) {
            Ok(d) => fixed += d,
            Err(_) => return f64::NAN,
        }
    }
    (realized - fixed) / n
}

/// Expert of the gridworld experiment: per-state softmax of scaled normal logits.
pub fn gridworld_expert<R: Rng + ?Sized>(
    num_states: usize,
    num_actions: usize,
    scale: f64,
    rng: &mut R,
) -> Result<TabularPolicy> {
    let rows = (0..num_states)
        .map(|_| {
            let z: Vec<f64> = (0..num_actions)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect();
            softmax(&z)
        })
        .collect::<Result<Vec<_>>>()?;
    TabularPolicy::new(rows)
}

fn state_frequencies(states: &[usize], num_states: usize) -> Vec<f64> {
    let mut f = vec![0.0; num_states];
    for &s in states {
        f[s] += 1.0;
    }
    let n = states.len().max(1) as f64;
    f.iter_mut().for_each(|v| *v /= n);
    f
}

/// `Σ_s ρ_π(s)/(1−γ) · D(π(s) ‖ π_E(s))`.
fn occupancy_divergence(
    mdp: &TabularMdpSpec,
    pi: &TabularPolicy,
    expert: &TabularPolicy,
    reg: &Regularizer,
) -> Result<f64> {
    let gamma = mdp.gamma();
    let rho = visitation_density(mdp, pi, gamma)?;
    Ok(rho
        .rho
        .iter()
        .enumerate()
        .map(|(s, r)| r / (1.0 - gamma) * reg.divergence(pi.row(s).as_slice(), expert.row(s).as_slice()))
        .sum())
}

fn run_mdp(cfg: &ExperimentConfig, reg: &Regularizer, schedule: &StepSchedule, seed: u64) -> Result<Vec<RunRecord>> {
    let m = &cfg.mdp;
    let mdp = TabularMdpSpec::gridworld(m.grid_size, m.slip, cfg.gamma)?;
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let expert = gridworld_expert(ns, na, m.expert_logit_scale, &mut rng)?;
    let rho_expert = visitation_density(&mdp, &expert, cfg.gamma)?;
    let noise = NoiseSpec::new(cfg.noise_epsilon)?;
    let horizon = cfg.samples_per_round;
    let mut pi = TabularPolicy::uniform(ns, na);
    let mut bar = TabularPolicy::uniform(ns, na);
    let mut tracker = RegretTracker::new(ns, na, *reg, cfg.gamma);
    let mut records = Vec::with_capacity(cfg.total_steps);
    for t in 1..=cfg.total_steps {
        let eta = schedule.eta(t)?;
        let (states, actions) = rollout_with_actions(&mdp, &expert, horizon, &mut rng)?;
        let actions = corrupt_discrete(&actions, na, noise, &mut rng);
        let mut per_state = vec![Vec::new(); ns];
        for (&s, &a) in states.iter().zip(&actions) {
            per_state[s].push(a);
        }
        for (s, acts) in per_state.iter().enumerate() {
            if !acts.is_empty() {
                let row = fit_reference_counts(bar.row(s), acts, m.smoothing, m.reference_lr)?;
                bar.set_row(s, row)?;
            }
        }
        let (agent_states, _) = rollout_with_actions(&mdp, &pi, horizon, &mut rng)?;
        tracker.push(&pi, &bar, &states[..horizon])?;

        let step = md_step_tabular_detailed(&pi, &bar, eta, reg)?;
        let psi = reward_table(&step.policy, reg)?;
        let rho_agent = visitation_density(&mdp, &pi, cfg.gamma)?;
        let shaped = psi_lambda_reward(&psi, &rho_expert, &rho_agent, cfg.lambda)?;
        let scaled = shaped
            .iter()
            .map(|y| DualVector::new(y.as_slice().iter().map(|v| v / cfg.lambda).collect()))
            .collect::<Result<Vec<_>>>()?;
        let next = exact_regularized_rl(&scaled, reg)?;

        let fe = state_frequencies(&states[..horizon], ns);
        let fa = state_frequencies(&agent_states[..horizon], ns);
        let weights: Vec<f64> = fe
            .iter()
            .zip(&fa)
            .map(|(e, a)| m.mixing_ratio * e + (1.0 - m.mixing_ratio) * a)
            .collect();
        let total: f64 = weights.iter().sum();
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let loss = mdairl_loss(&next, &bar, &pi, eta, &weights, reg)?;
        pi = next;

        let mut r = RunRecord::new(t, eta);
        r.d_agent_expert = occupancy_divergence(&mdp, &pi, &expert, reg)?;
        r.d_ref_expert = occupancy_divergence(&mdp, &bar, &expert, reg)?;
        r.regret = tracker.regret().unwrap_or(f64::NAN);
        r.clamped_flag = step.clamped || step.projected;
        r.aux.insert("mdairl_loss".into(), loss);
        records.push(r);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: ExperimentKind, steps: usize) -> ExperimentConfig {
        let mut c = ExperimentConfig::defaults(kind).with_steps(steps);
        c.seeds = vec![3, 1];
        c.bandit.num_actions = 10;
        c.mdp.grid_size = 3;
        c
    }

    #[test]
    fn runs_every_kind() {
        for kind in [ExperimentKind::Bandit, ExperimentKind::GaussianToy, ExperimentKind::Mdp] {
            let runs = simulate(&small(kind, 20), Execution::Sequential).unwrap();
            assert_eq!(runs.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![1, 3]);
            let last = runs[0].records.last().unwrap();
            assert_eq!(last.t, 20);
            assert!(last.d_agent_expert.is_finite(), "{kind}");
        }
    }

    #[test]
    fn baseline_tracks_reference() {
        let c = small(ExperimentKind::Bandit, 15);
        let run = run_seed(&c, 2).unwrap();
        for (b, r) in run.baseline.unwrap().iter().zip(&run.records) {
            assert!((b.d_agent_expert - r.d_ref_expert).abs() < 1e-9);
        }
    }

    #[test]
    fn parallel_matches_sequential() {
        let c = small(ExperimentKind::Mdp, 10);
        assert_eq!(
            simulate(&c, Execution::Sequential).unwrap(),
            simulate(&c, Execution::Parallel).unwrap()
        );
    }

    #[test]
    fn mdp_reward_round_trip_reproduces_md_step() {
        let c = small(ExperimentKind::Mdp, 5);
        let records = run_series(&c, &Regularizer::Shannon, &StepSchedule::Constant { eta: 1.0 }, 0).unwrap();
        for r in &records {
            assert!((r.d_agent_expert - r.d_ref_expert).abs() < 1e-8);
        }
    }
}
