use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::RunRecord;
use crate::error::{Error, Result};

pub const MIN_RECORDS: usize = 50;

/// Which record field a diagnostic reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Metric {
    AgentExpert,
    ReferenceExpert,
    Regret,
    Aux(String),
}

impl Metric {
    fn read(&self, r: &RunRecord) -> Result<f64> {
        match self {
            Metric::AgentExpert => Ok(r.d_agent_expert),
            Metric::ReferenceExpert => Ok(r.d_ref_expert),
            Metric::Regret => Ok(r.regret),
            Metric::Aux(k) => r
                .aux
                .get(k)
                .copied()
                .ok_or_else(|| Error::InvalidArgument(format!("record {} has no aux metric `{k}`", r.t))),
        }
    }
}

/// Convergence check to run on a series `A_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DiagnosticMode {
    /// `sup T·A_T` over the last decade `[t_max/10, t_max]` is at most
    /// `factor` times the sup over the decade before it.
    Theorem1b { factor: f64 },
    /// `ln A_t` is linear in `t` with `R² ≥ min_r2` and every ratio
    /// `A_{t+1}/A_t` lies in `(0, 1)`.
    Theorem2 { min_r2: f64 },
    /// Final-window mean falls below `ratio` times the first value.
    Proposition1 { window: usize, ratio: f64 },
    /// Final-window mean stays at or above `floor`.
    Theorem1a { window: usize, floor: f64 },
}

impl DiagnosticMode {
    pub fn name(&self) -> &'static str {
        match self {
            DiagnosticMode::Theorem1b { .. } => "theorem1b",
            DiagnosticMode::Theorem2 { .. } => "theorem2",
            DiagnosticMode::Proposition1 { .. } => "proposition1",
            DiagnosticMode::Theorem1a { .. } => "theorem1a",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub mode: String,
    pub passed: bool,
    pub stats: BTreeMap<String, f64>,
}

pub fn diagnose(records: &[RunRecord], metric: &Metric, mode: &DiagnosticMode) -> Result<DiagnosticReport> {
    let t: Vec<f64> = records.iter().map(|r| r.t as f64).collect();
    let a = records.iter().map(|r| metric.read(r)).collect::<Result<Vec<_>>>()?;
    diagnose_series(&t, &a, mode)
}

/// Runs `mode` on `(t, A_t)` pairs.
pub fn diagnose_series(t: &[f64], a: &[f64], mode: &DiagnosticMode) -> Result<DiagnosticReport> {
    if t.len() != a.len() {
        return Err(Error::LengthMismatch {
            expected: t.len(),
            got: a.len(),
        });
    }
    if a.len() < MIN_RECORDS {
        return Err(Error::InsufficientData {
            needed: MIN_RECORDS,
            got: a.len(),
        });
    }
    let mut stats = BTreeMap::new();
    let passed = match *mode {
        DiagnosticMode::Theorem1b { factor } => {
            let t_max = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let split = t_max / 10.0;
            let sup = |lo: f64, hi: f64| {
                t.iter()
                    .zip(a)
                    .filter(|(ti, _)| **ti >= lo && **ti <= hi)
                    .map(|(ti, ai)| ti * ai)
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            let early = sup(split / 10.0, split);
            let late = sup(split, t_max);
            if !early.is_finite() || !late.is_finite() {
                return Err(Error::InsufficientData {
                    needed: 100,
                    got: t_max as usize,
                });
            }
            stats.insert("sup_early".into(), early);
            stats.insert("sup_late".into(), late);
            stats.insert("sup".into(), early.max(late));
            late <= factor * early
        }
        DiagnosticMode::Theorem2 { min_r2 } => {
            if a.iter().any(|v| !(*v > 0.0)) {
                stats.insert("nonpositive".into(), a.iter().filter(|v| !(**v > 0.0)).count() as f64);
                false
            } else {
                let y: Vec<f64> = a.iter().map(|v| v.ln()).collect();
                let (slope, intercept, r2) = linear_fit(t, &y);
                let ratios: Vec<f64> = a.windows(2).map(|w| w[1] / w[0]).collect();
                let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                stats.insert("slope".into(), slope);
                stats.insert("intercept".into(), intercept);
                stats.insert("r2".into(), r2);
                stats.insert("ratio_min".into(), lo);
                stats.insert("ratio_max".into(), hi);
                r2 >= min_r2 && lo > 0.0 && hi < 1.0
            }
        }
        DiagnosticMode::Proposition1 { window, ratio } => {
            let m = tail_mean(a, window)?;
            stats.insert("final_mean".into(), m);
            stats.insert("initial".into(), a[0]);
            m < ratio * a[0]
        }
        DiagnosticMode::Theorem1a { window, floor } => {
            let m = tail_mean(a, window)?;
            stats.insert("final_mean".into(), m);
            stats.insert("floor".into(), floor);
            m >= floor
        }
    };
    Ok(DiagnosticReport {
        mode: mode.name().into(),
        passed,
        stats,
    })
}

fn tail_mean(a: &[f64], window: usize) -> Result<f64> {
    if window == 0 || window > a.len() {
        return Err(Error::InvalidArgument(format!(
            "window {window} does not fit {} records",
            a.len()
        )));
    }
    Ok(a[a.len() - window..].iter().sum::<f64>() / window as f64)
}

/// Ordinary least squares `y ≈ slope·x + intercept`; returns `(slope, intercept, R²)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ts(n: usize) -> Vec<f64> {
        (1..=n).map(|t| t as f64).collect()
    }

    #[test]
    fn geometric_sequence() {
        let t = ts(100);
        let a: Vec<f64> = t.iter().map(|t| 0.9f64.powf(*t)).collect();
        let r = diagnose_series(&t, &a, &DiagnosticMode::Theorem2 { min_r2: 0.999 }).unwrap();
        assert!(r.passed);
        assert_abs_diff_eq!(r.stats["slope"], 0.9f64.ln(), epsilon = 1e-6);
        assert_abs_diff_eq!(r.stats["r2"], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn harmonic_sequence() {
        let t = ts(1000);
        let a: Vec<f64> = t.iter().map(|t| 1.0 / t).collect();
        let r = diagnose_series(&t, &a, &DiagnosticMode::Theorem1b { factor: 2.0 }).unwrap();
        assert!(r.passed);
        assert_abs_diff_eq!(r.stats["sup"], 1.0, epsilon = 1e-12);
        let bad: Vec<f64> = t.iter().map(|t| 1.0 / t.sqrt()).collect();
        assert!(
            !diagnose_series(&t, &bad, &DiagnosticMode::Theorem1b { factor: 2.0 })
                .unwrap()
                .passed
        );
    }

    #[test]
    fn window_modes() {
        let t = ts(60);
        let decaying: Vec<f64> = t.iter().map(|t| 1.0 / t).collect();
        let p = DiagnosticMode::Proposition1 { window: 10, ratio: 0.1 };
        assert!(diagnose_series(&t, &decaying, &p).unwrap().passed);
        let stalled = vec![0.5; 60];
        assert!(!diagnose_series(&t, &stalled, &p).unwrap().passed);
        let f = DiagnosticMode::Theorem1a { window: 10, floor: 0.4 };
        assert!(diagnose_series(&t, &stalled, &f).unwrap().passed);
        assert!(!diagnose_series(&t, &decaying, &f).unwrap().passed);
    }

    #[test]
    fn needs_enough_records() {
        let t = ts(49);
        let a = vec![1.0; 49];
        assert!(matches!(
            diagnose_series(&t, &a, &DiagnosticMode::Theorem1b { factor: 2.0 }),
            Err(Error::InsufficientData { needed: 50, got: 49 })
        ));
    }

    #[test]
    fn reads_record_fields() {
        let recs: Vec<RunRecord> = (1..=60)
            .map(|t| {
                let mut r = RunRecord::new(t, 0.5);
                r.d_agent_expert = 1.0 / t as f64;
                r.aux.insert("x".into(), 2.0);
                r
            })
            .collect();
        let r = diagnose(&recs, &Metric::AgentExpert, &DiagnosticMode::Theorem1b { factor: 2.0 }).unwrap();
        assert!(r.passed);
        assert!(diagnose(
            &recs,
            &Metric::Aux("missing".into()),
            &DiagnosticMode::Theorem1b { factor: 2.0 }
        )
        .is_err());
    }
}
