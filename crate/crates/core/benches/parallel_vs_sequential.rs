use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mdirl::experiment::{schedule_sweep, simulate, verify_suite_with, ExperimentConfig, ExperimentKind};
use mdirl::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn bandit_seeds(c: &mut Criterion) {
    let mut cfg = ExperimentConfig::defaults(ExperimentKind::Bandit);
    cfg.bandit.num_actions = 20;
    cfg.total_steps = 200;
    cfg.seeds = (0..8).collect();
    let mut group = c.benchmark_group("bandit_seeds");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| simulate(&cfg, exec).unwrap())
        });
    }
    group.finish();
}

fn sweep_cells(c: &mut Criterion) {
    let mut cfg = ExperimentConfig::defaults(ExperimentKind::ScheduleSweep);
    cfg.total_steps = 20;
    cfg.seeds = (0..4).collect();
    let mut group = c.benchmark_group("sweep_cells");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| schedule_sweep(&cfg, exec).unwrap())
        });
    }
    group.finish();
}

fn verify_instances(c: &mut Criterion) {
    let mut group = c.benchmark_group("verify_suite");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| verify_suite_with(200, 1, exec))
        });
    }
    group.finish();
}

criterion_group!(benches, bandit_seeds, sweep_cells, verify_instances);
criterion_main!(benches);
