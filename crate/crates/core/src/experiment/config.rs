use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bregman::Regularizer;
use crate::engine::StepSchedule;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Bandit,
    GaussianToy,
    Mdp,
    ScheduleSweep,
    Verify,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::Bandit,
        ExperimentKind::GaussianToy,
        ExperimentKind::Mdp,
        ExperimentKind::ScheduleSweep,
        ExperimentKind::Verify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Bandit => "bandit",
            ExperimentKind::GaussianToy => "gaussian_toy",
            ExperimentKind::Mdp => "mdp",
            ExperimentKind::ScheduleSweep => "schedule_sweep",
            ExperimentKind::Verify => "verify",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config {
                path: "experiment".into(),
                message: format!("unknown experiment `{s}`"),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BanditSection {
    pub num_actions: usize,
    pub smoothing: f64,
    pub reference_lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianToySection {
    pub expert_mean: Vec<f64>,
    pub expert_sigma: Vec<f64>,
    /// Strictly lower entries of the expert's unit-lower factor, row-major.
    pub expert_lower: Vec<f64>,
    pub reference_lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpSection {
    pub grid_size: usize,
    pub slip: f64,
    /// Standard deviation of the expert's per-state logits.
    pub expert_logit_scale: f64,
    pub smoothing: f64,
    pub reference_lr: f64,
    /// Share of expert states in the sampled state weights of the loss.
    pub mixing_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// `(η_1, η_T)` pairs.
    pub pairs: Vec<[f64; 2]>,
    pub regularizers: Vec<Regularizer>,
}

/// Everything a run needs. Missing keys take the defaults of the chosen
/// experiment, so a file may be as short as `experiment = "bandit"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub regularizer: Regularizer,
    pub schedule: StepSchedule,
    pub seeds: Vec<u64>,
    pub total_steps: usize,
    pub samples_per_round: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub noise_epsilon: f64,
    /// Also run the `η ≡ 1` direct-chase baseline.
    pub baseline: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub bandit: BanditSection,
    pub gaussian_toy: GaussianToySection,
    pub mdp: MdpSection,
    pub schedule_sweep: SweepSection,
}

impl ExperimentConfig {
    pub fn defaults(kind: ExperimentKind) -> Self {
        let (schedule, seeds, total_steps) = match kind {
            ExperimentKind::Bandit => ("linear_alpha:0.5,2", 5, 2000),
            ExperimentKind::GaussianToy => ("constant:0.2", 10, 100),
            ExperimentKind::Mdp => ("linear_alpha:0.5,2", 10, 500),
            ExperimentKind::ScheduleSweep => ("linear_alpha:1,10", 10, 100),
            ExperimentKind::Verify => ("constant:0.5", 1, 500),
        };
        ExperimentConfig {
            experiment: kind,
            regularizer: Regularizer::Shannon,
            schedule: schedule.parse().expect("valid default schedule"),
            seeds: (0..seeds).collect(),
            total_steps,
            samples_per_round: 16,
            lambda: 1.0,
            gamma: 0.9,
            noise_epsilon: 0.0,
            baseline: true,
            output_dir: None,
            bandit: BanditSection {
                num_actions: 100,
                smoothing: 0.1,
                reference_lr: 0.5,
            },
            gaussian_toy: GaussianToySection {
                expert_mean: vec![5.0, 3.0],
                expert_sigma: vec![0.6, 0.8],
                expert_lower: vec![0.5],
                reference_lr: 0.7,
            },
            mdp: MdpSection {
                grid_size: 5,
                slip: 0.1,
                expert_logit_scale: 1.0,
                smoothing: 0.1,
                reference_lr: 0.5,
                mixing_ratio: 0.5,
            },
            schedule_sweep: SweepSection {
                pairs: vec![
                    [2.0, 2.0],
                    [1.0, 1.0],
                    [0.5, 0.5],
                    [0.2, 0.2],
                    [10.0, 1.0],
                    [1.0, 0.1],
                    [1.0, 0.01],
                ],
                regularizers: vec![
                    Regularizer::Shannon,
                    Regularizer::Tsallis { q: 1.1, k: 1.0 },
                    Regularizer::Tsallis { q: 1.5, k: 1.0 },
                    Regularizer::Tsallis { q: 2.0, k: 1.0 },
                ],
            },
        }
    }

    /// Parses a TOML document on top of the defaults for its `experiment`.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::parse_with(text, None)
    }

    /// Like [`ExperimentConfig::from_toml_str`], but `experiment` may be
    /// omitted and must equal `kind` when present.
    pub fn from_toml_str_for(kind: ExperimentKind, text: &str) -> Result<Self> {
        Self::parse_with(text, Some(kind))
    }

    fn parse_with(text: &str, expected: Option<ExperimentKind>) -> Result<Self> {
        let mut user: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config {
            path: "<document>".into(),
            message: e.message().to_string(),
        })?;
        let declared = match user.get("experiment") {
            Some(toml::Value::String(s)) => Some(s.parse::<ExperimentKind>()?),
            Some(_) => {
                return Err(Error::Config {
                    path: "experiment".into(),
                    message: "expected a string".into(),
                })
            }
            None => None,
        };
        let kind = match (declared, expected) {
            (Some(d), Some(e)) if d != e => {
                return Err(Error::Config {
                    path: "experiment".into(),
                    message: format!("file is for `{d}` but `{e}` was requested"),
                })
            }
            (Some(k), _) | (None, Some(k)) => k,
            (None, None) => {
                return Err(Error::Config {
                    path: "experiment".into(),
                    message: "missing required key".into(),
                })
            }
        };
        user.insert("experiment".into(), toml::Value::String(kind.name().into()));
        let mut merged = toml::Table::try_from(Self::defaults(kind)).map_err(|e| Error::Config {
            path: "<defaults>".into(),
            message: e.to_string(),
        })?;
        merge(&mut merged, user);
        let cfg: ExperimentConfig =
            serde_path_to_error::deserialize(toml::Value::Table(merged)).map_err(|e| Error::Config {
                path: e.path().to_string(),
                message: e.inner().message().to_string(),
            })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config {
            path: "<document>".into(),
            message: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |path: &str, message: String| {
            Err(Error::Config {
                path: path.into(),
                message,
            })
        };
        if self.total_steps == 0 {
            return fail("total_steps", "must be at least 1".into());
        }
        if self.seeds.is_empty() {
            return fail("seeds", "must not be empty".into());
        }
        if self.samples_per_round == 0 {
            return fail("samples_per_round", "must be at least 1".into());
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return fail("lambda", format!("must be positive, got {}", self.lambda));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return fail("gamma", format!("must lie in [0, 1), got {}", self.gamma));
        }
        if !(self.noise_epsilon.is_finite() && self.noise_epsilon >= 0.0) {
            return fail(
                "noise_epsilon",
                format!("must be nonnegative, got {}", self.noise_epsilon),
            );
        }
        if let Err(e) = self.schedule.bind_horizon(self.total_steps).eta(self.total_steps) {
            return fail("schedule", e.to_string());
        }
        let unit = |path: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                fail(path, format!("must lie in [0, 1], got {v}"))
            }
        };
        let nonneg = |path: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                fail(path, format!("must be nonnegative, got {v}"))
            }
        };
        if self.bandit.num_actions < 2 {
            return fail("bandit.num_actions", "must be at least 2".into());
        }
        nonneg("bandit.smoothing", self.bandit.smoothing)?;
        unit("bandit.reference_lr", self.bandit.reference_lr)?;

        let toy = &self.gaussian_toy;
        let d = toy.expert_mean.len();
        if d == 0 {
            return fail("gaussian_toy.expert_mean", "must not be empty".into());
        }
        if toy.expert_sigma.len() != d {
            return fail(
                "gaussian_toy.expert_sigma",
                format!("expected {d} entries, got {}", toy.expert_sigma.len()),
            );
        }
        if toy.expert_lower.len() != d * (d - 1) / 2 {
            return fail(
                "gaussian_toy.expert_lower",
                format!("expected {} entries, got {}", d * (d - 1) / 2, toy.expert_lower.len()),
            );
        }
        if toy.expert_sigma.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return fail("gaussian_toy.expert_sigma", "entries must be positive".into());
        }
        if toy.expert_sigma.iter().map(|s| 2.0 * s.ln()).sum::<f64>() >= 0.0 {
            return fail(
                "gaussian_toy.expert_sigma",
                "expert covariance determinant must be below 1".into(),
            );
        }
        unit("gaussian_toy.reference_lr", toy.reference_lr)?;

        if self.mdp.grid_size == 0 {
            return fail("mdp.grid_size", "must be positive".into());
        }
        unit("mdp.slip", self.mdp.slip)?;
        nonneg("mdp.expert_logit_scale", self.mdp.expert_logit_scale)?;
        nonneg("mdp.smoothing", self.mdp.smoothing)?;
        unit("mdp.reference_lr", self.mdp.reference_lr)?;
        unit("mdp.mixing_ratio", self.mdp.mixing_ratio)?;

        let sweep = &self.schedule_sweep;
        if self.experiment == ExperimentKind::ScheduleSweep {
            if sweep.pairs.is_empty() {
                return fail("schedule_sweep.pairs", "grid must not be empty".into());
            }
            if sweep.regularizers.is_empty() {
                return fail("schedule_sweep.regularizers", "must not be empty".into());
            }
        }
        if let Some(p) = sweep
            .pairs
            .iter()
            .find(|p| !(p[0] > 0.0 && p[1] > 0.0 && p[0].is_finite() && p[1].is_finite()))
        {
            return fail(
                "schedule_sweep.pairs",
                format!("step sizes must be positive, got {p:?}"),
            );
        }
        let gaussian_ok = |r: &Regularizer| matches!(r, Regularizer::Shannon | Regularizer::Tsallis { .. });
        if let Some(r) = sweep.regularizers.iter().find(|r| !gaussian_ok(r)) {
            return fail("schedule_sweep.regularizers", format!("no Gaussian geometry for `{r}`"));
        }
        if self.experiment == ExperimentKind::GaussianToy && !gaussian_ok(&self.regularizer) {
            return fail(
                "regularizer",
                format!("no Gaussian geometry for `{}`", self.regularizer),
            );
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seeds = vec![seed];
        self
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.total_steps = steps;
        self
    }

    pub fn with_output_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.output_dir = Some(dir.into());
        self
    }

    /// The schedule with any open horizon bound to `total_steps`.
    pub fn bound_schedule(&self) -> StepSchedule {
        self.schedule.bind_horizon(self.total_steps)
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_takes_defaults() {
        let c = ExperimentConfig::from_toml_str("experiment = \"bandit\"").unwrap();
        assert_eq!(c, ExperimentConfig::defaults(ExperimentKind::Bandit));
        assert_eq!(c.seeds.len(), 5);
        let t = ExperimentConfig::from_toml_str("experiment = \"gaussian_toy\"").unwrap();
        assert_eq!(t.seeds.len(), 10);
    }

    #[test]
    fn round_trip() {
        for kind in ExperimentKind::ALL {
            let c = ExperimentConfig::defaults(kind).with_output_dir("out");
            let back = ExperimentConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn sections_override_partially() {
        let c = ExperimentConfig::from_toml_str(
            "experiment = \"bandit\"\nregularizer = \"tsallis:q=1.5,k=1\"\n[bandit]\nnum_actions = 10\n",
        )
        .unwrap();
        assert_eq!(c.bandit.num_actions, 10);
        assert_eq!(c.bandit.smoothing, 0.1);
        assert_eq!(c.regularizer, Regularizer::Tsallis { q: 1.5, k: 1.0 });
    }

    fn path_of(text: &str) -> String {
        match ExperimentConfig::from_toml_str(text) {
            Err(Error::Config { path, .. }) => path,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn errors_carry_field_paths() {
        assert_eq!(
            path_of("experiment = \"bandit\"\n[bandit]\nnum_actions = \"many\""),
            "bandit.num_actions"
        );
        assert_eq!(path_of("experiment = \"bandit\"\ntotal_steps = 0"), "total_steps");
        assert_eq!(path_of("experiment = \"bandit\"\nseeds = []"), "seeds");
        assert_eq!(path_of("experiment = \"nope\""), "experiment");
        assert_eq!(path_of("seeds = [1]"), "experiment");
        assert_eq!(
            path_of("experiment = \"mdp\"\n[mdp]\nmixing_ratio = 2.0"),
            "mdp.mixing_ratio"
        );
        assert_eq!(
            path_of("experiment = \"bandit\"\nregularizer = \"bogus\""),
            "regularizer"
        );
        assert_eq!(path_of("experiment = \"bandit\"\ntypo_key = 1"), "typo_key");
    }

    #[test]
    fn requested_kind_fills_or_checks_experiment() {
        let c = ExperimentConfig::from_toml_str_for(ExperimentKind::Mdp, "gamma = 0.5").unwrap();
        assert_eq!(c.experiment, ExperimentKind::Mdp);
        assert_eq!(c.gamma, 0.5);
        assert!(ExperimentConfig::from_toml_str_for(ExperimentKind::Mdp, "experiment = \"bandit\"").is_err());
    }
}
