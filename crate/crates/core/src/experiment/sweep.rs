use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::run_series;
use super::summary::Stat;
use crate::bregman::Regularizer;
use crate::engine::StepSchedule;
use crate::error::{Error, Result};
use crate::parallel::Execution;

/// Final divergences of one `(regularizer, η_1, η_T)` cell across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub regularizer: String,
    pub eta_1: f64,
    pub eta_t: f64,
    /// `None` where a seed hit an inadmissible update.
    pub finals: Vec<Option<f64>>,
    pub stat: Stat,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub total_steps: usize,
    pub seeds: Vec<u64>,
    pub cells: Vec<SweepCell>,
}

impl SweepTable {
    pub fn cell(&self, reg: &Regularizer, eta_1: f64, eta_t: f64) -> Option<&SweepCell> {
        let name = reg.to_string();
        self.cells
            .iter()
            .find(|c| c.regularizer == name && c.eta_1 == eta_1 && c.eta_t == eta_t)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["regularizer", "eta_1", "eta_T", "mean", "std", "failures"])?;
        for c in &self.cells {
            w.write_record([
                c.regularizer.clone(),
                c.eta_1.to_string(),
                c.eta_t.to_string(),
                c.stat.mean.to_string(),
                c.stat.std.to_string(),
                c.failures.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Linear-α schedules over the Gaussian toy: every configured regularizer
/// against every `(η_1, η_T)` pair, one run per seed.
pub fn schedule_sweep(cfg: &ExperimentConfig, exec: Execution) -> Result<SweepTable> {
    let grid = &cfg.schedule_sweep;
    if grid.pairs.is_empty() || grid.regularizers.is_empty() {
        return Err(Error::Config {
            path: "schedule_sweep.pairs".into(),
            message: "grid must not be empty".into(),
        });
    }
    let mut seeds = cfg.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    let mut cells = Vec::new();
    for reg in &grid.regularizers {
        for pair in &grid.pairs {
            cells.push((
                *reg,
                pair[0],
                pair[1],
                StepSchedule::from_etas(pair[0], pair[1], cfg.total_steps)?,
            ));
        }
    }
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| seeds.iter().map(move |&s| (c, s)))
        .collect();
    let finals = exec.map(jobs, |(c, seed)| {
        let (reg, _, _, schedule) = &cells[c];
        run_series(cfg, reg, schedule, seed)
            .ok()
            .and_then(|r| r.last().map(|l| l.d_agent_expert))
            .filter(|v| v.is_finite())
    });
    let cells = cells
        .iter()
        .zip(finals.chunks(seeds.len()))
        .map(|((reg, e1, et, _), f)| {
            let ok: Vec<f64> = f.iter().flatten().copied().collect();
            SweepCell {
                regularizer: reg.to_string(),
                eta_1: *e1,
                eta_t: *et,
                finals: f.to_vec(),
                stat: Stat::of(&ok),
                failures: f.len() - ok.len(),
            }
        })
        .collect();
    let table = SweepTable {
        total_steps: cfg.total_steps,
        seeds,
        cells,
    };
    if let Some(dir) = &cfg.output_dir {
        fs::create_dir_all(dir)?;
        table.write_csv(&dir.join("sweep.csv"))?;
        let json = serde_json::to_string_pretty(&table).map_err(|e| Error::Io(e.to_string()))?;
        fs::write(dir.join("sweep.json"), json + "\n")?;
        fs::write(dir.join("config.toml"), cfg.to_toml_string()?)?;
    }
    Ok(table)
}
