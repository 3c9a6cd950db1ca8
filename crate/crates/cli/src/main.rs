use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use mdirl::experiment::{
    run_experiment, schedule_sweep, verify_suite, ExperimentConfig, ExperimentKind, SweepTable, VerifyReport,
};
use mdirl::{Error, Execution};

const OUT_DIR_ENV: &str = "MDIRL_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "mdirl-out";

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Experiment {
    Bandit,
    GaussianToy,
    Mdp,
    ScheduleSweep,
    Verify,
}

impl From<Experiment> for ExperimentKind {
    fn from(e: Experiment) -> Self {
        match e {
            Experiment::Bandit => ExperimentKind::Bandit,
            Experiment::GaussianToy => ExperimentKind::GaussianToy,
            Experiment::Mdp => ExperimentKind::Mdp,
            Experiment::ScheduleSweep => ExperimentKind::ScheduleSweep,
            Experiment::Verify => ExperimentKind::Verify,
        }
    }
}

/// Mirror-descent IRL experiments.
///
/// Output goes to --out, else the config's output_dir, else $MDIRL_OUT_DIR,
/// else ./mdirl-out. Exit codes: 0 success, 1 configuration or runtime
/// error, 2 verification failure.
#[derive(Debug, Parser)]
#[command(name = "mdirl", version)]
struct Cli {
    experiment: Experiment,

    /// TOML file; keys not given take the experiment's defaults.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Run this single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,

    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long)]
    steps: Option<usize>,

    /// Run seeds one after another on the calling thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug)]
enum Failure {
    Config(Error),
    Verification,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let kind = ExperimentKind::from(cli.experiment);
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            ExperimentConfig::from_toml_str_for(kind, &text)?
        }
        None => ExperimentConfig::defaults(kind),
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(steps) = cli.steps {
        cfg = cfg.with_steps(steps);
    }
    let out = cli
        .out
        .clone()
        .or(cfg.output_dir.take())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    cfg = cfg.with_output_dir(out);
    cfg.validate()?;
    Ok(cfg)
}

fn print_sweep(table: &SweepTable) {
    println!(
        "{:<22} {:>8} {:>8} {:>12} {:>12} {:>8}",
        "regularizer", "eta_1", "eta_T", "mean", "std", "failed"
    );
    for c in &table.cells {
        println!(
            "{:<22} {:>8} {:>8} {:>12.5} {:>12.5} {:>8}",
            c.regularizer, c.eta_1, c.eta_t, c.stat.mean, c.stat.std, c.failures
        );
    }
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let cfg = load(cli).map_err(Failure::Config)?;
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let out = cfg.output_dir.clone().expect("set by load");
    match cfg.experiment {
        ExperimentKind::Verify => {
            let report = verify_suite(exec);
            println!("{report}");
            std::fs::create_dir_all(&out).map_err(|e| Failure::Config(e.into()))?;
            let json = report.to_json().map_err(Failure::Config)?;
            std::fs::write(out.join("verify.json"), json + "\n").map_err(|e| Failure::Config(e.into()))?;
            verdict(&report)
        }
        ExperimentKind::ScheduleSweep => {
            let table = schedule_sweep(&cfg, exec).map_err(Failure::Config)?;
            print_sweep(&table);
            eprintln!("wrote {}", out.display());
            Ok(())
        }
        _ => {
            let summary = run_experiment(&cfg, exec).map_err(Failure::Config)?;
            println!("{}", summary.to_json().map_err(Failure::Config)?);
            eprintln!("wrote {}", out.display());
            Ok(())
        }
    }
}

fn verdict(report: &VerifyReport) -> Result<(), Failure> {
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn exit_code(result: &Result<(), Failure>) -> u8 {
    match result {
        Ok(()) => 0,
        Err(Failure::Config(_)) => 1,
        Err(Failure::Verification) => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // usage errors count as configuration errors so that 2 stays reserved
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = execute(&cli);
    let code = exit_code(&result);
    match result {
        Ok(()) => {}
        Err(Failure::Config(e)) => eprintln!("error: {e}"),
        Err(Failure::Verification) => eprintln!("verification failed"),
    }
    ExitCode::from(code)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mdirl::experiment::CheckResult;

    fn check(passed: bool, asserted: bool) -> CheckResult {
        CheckResult {
            name: "three_point_identity".into(),
            subject: "fixture".into(),
            instances: 1,
            max_residual: if passed { 0.0 } else { 1.0 },
            tolerance: 1e-8,
            passed,
            asserted,
        }
    }

    #[test]
    fn failed_check_exits_two() {
        let bad = VerifyReport {
            checks: vec![check(true, true), check(false, true)],
        };
        assert_eq!(exit_code(&verdict(&bad)), 2);
        let reported = VerifyReport {
            checks: vec![check(true, true), check(false, false)],
        };
        assert_eq!(exit_code(&verdict(&reported)), 0);
    }

    #[test]
    fn config_errors_exit_one() {
        let e = Failure::Config(Error::InvalidArgument("x".into()));
        assert_eq!(exit_code(&Err(e)), 1);
    }
}
