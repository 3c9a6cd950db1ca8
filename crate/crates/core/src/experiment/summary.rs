use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentKind};
use super::run::{baseline_csv_name, seed_csv_name, SeedRun};
use crate::engine::{diagnose_series, read_records_csv, DiagnosticMode, RunRecord, MIN_RECORDS};
use crate::error::{Error, Result};

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len() as f64;
        if values.is_empty() {
            return Stat {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Stat { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub final_d_agent_expert: f64,
    pub final_d_ref_expert: f64,
    pub final_regret: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_final_d_agent_expert: Option<f64>,
    /// MD minus baseline; negative favours MD.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSummary {
    pub experiment: ExperimentKind,
    pub regularizer: String,
    pub schedule: String,
    pub total_steps: usize,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<SeedSummary>,
    pub final_d_agent_expert: Stat,
    pub final_d_ref_expert: Stat,
    pub final_regret: Stat,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_final_d_agent_expert: Option<Stat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_delta: Option<Stat>,
    pub verdicts: BTreeMap<String, bool>,
}

impl ResultSummary {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }
}

fn last(records: &[RunRecord]) -> Result<&RunRecord> {
    records.last().ok_or(Error::InsufficientData { needed: 1, got: 0 })
}

/// Per-seed finals, cross-seed statistics and verdicts over exactly `runs`.
pub fn summarize(cfg: &ExperimentConfig, runs: &[SeedRun]) -> Result<ResultSummary> {
    let mut per_seed = Vec::with_capacity(runs.len());
    for run in runs {
        let fin = last(&run.records)?;
        let base = run.baseline.as_deref().map(last).transpose()?.map(|r| r.d_agent_expert);
        per_seed.push(SeedSummary {
            seed: run.seed,
            final_d_agent_expert: fin.d_agent_expert,
            final_d_ref_expert: fin.d_ref_expert,
            final_regret: fin.regret,
            baseline_final_d_agent_expert: base,
            baseline_delta: base.map(|b| fin.d_agent_expert - b),
        });
    }
    let col = |f: fn(&SeedSummary) -> f64| Stat::of(&per_seed.iter().map(f).collect::<Vec<_>>());
    let opt_col = |f: fn(&SeedSummary) -> Option<f64>| -> Option<Stat> {
        per_seed.iter().map(f).collect::<Option<Vec<_>>>().map(|v| Stat::of(&v))
    };
    let agent = col(|s| s.final_d_agent_expert);
    let regret = col(|s| s.final_regret);
    let reference = col(|s| s.final_d_ref_expert);
    let baseline = opt_col(|s| s.baseline_final_d_agent_expert);
    let delta = opt_col(|s| s.baseline_delta);

    let mut verdicts = BTreeMap::new();
    verdicts.insert("agent_below_reference".into(), agent.mean < reference.mean);
    if let Some(b) = baseline {
        verdicts.insert("md_not_worse_than_direct".into(), agent.mean <= b.mean);
    }
    let steps = runs.first().map_or(0, |r| r.records.len());
    if steps >= MIN_RECORDS && runs.iter().all(|r| r.records.len() == steps) {
        let t: Vec<f64> = runs[0].records.iter().map(|r| r.t as f64).collect();
        let mean: Vec<f64> = (0..steps)
            .map(|i| runs.iter().map(|r| r.records[i].d_agent_expert).sum::<f64>() / runs.len() as f64)
            .collect();
        let window = (steps / 10).max(1);
        let report = diagnose_series(&t, &mean, &DiagnosticMode::Proposition1 { window, ratio: 0.1 })?;
        verdicts.insert("divergence_decays_tenfold".into(), report.passed);
    }

    Ok(ResultSummary {
        experiment: cfg.experiment,
        regularizer: cfg.regularizer.to_string(),
        schedule: cfg.bound_schedule().to_string(),
        total_steps: cfg.total_steps,
        seeds: runs.iter().map(|r| r.seed).collect(),
        per_seed,
        final_d_agent_expert: agent,
        final_d_ref_expert: reference,
        final_regret: regret,
        baseline_final_d_agent_expert: baseline,
        baseline_delta: delta,
        verdicts,
    })
}

/// Rebuilds the summary from the CSV files a run left in `dir`.
pub fn summarize_output_dir(cfg: &ExperimentConfig, dir: &Path) -> Result<ResultSummary> {
    let mut seeds = cfg.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    let runs = seeds
        .into_iter()
        .map(|seed| {
            let records = read_records_csv(fs::File::open(dir.join(seed_csv_name(seed)))?)?;
            let baseline = if cfg.baseline {
                Some(read_records_csv(fs::File::open(dir.join(baseline_csv_name(seed)))?)?)
            } else {
                None
            };
            Ok(SeedRun {
                seed,
                records,
                baseline,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    summarize(cfg, &runs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_std() {
        let s = Stat::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(Stat::of(&[7.0]).std, 0.0);
    }
}
