use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use isea::par::Execution;
use isea::pipeline::sweep::run_point;
use isea::pipeline::trial::PointSettings;
use isea::pipeline::{ExperimentConfig, Scenario};

fn trials(c: &mut Criterion) {
    let cfg = ExperimentConfig {
        trials: 200,
        calibration_samples: 2000,
        ..ExperimentConfig::default()
    };
    let prior = cfg.build_prior().unwrap();
    let scn = Scenario::build(&cfg, &prior, PointSettings::from_config(&cfg)).unwrap();

    let mut group = c.benchmark_group("fdm_point_200_trials");
    group.sample_size(10);
    for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| run_point(&cfg, &scn, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, trials);
criterion_main!(benches);
