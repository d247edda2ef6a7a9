use isea::par::Execution;
use isea::pipeline::experiments::{accuracy_sweep, compare, entropy_sweep, estimator_sweep};
use isea::pipeline::{run_sweep, ExperimentConfig, SweepSpec, SweepVariable};
use isea::transceiver::SolverKind;
use isea::Scheme;

fn small(trials: usize) -> ExperimentConfig {
    ExperimentConfig {
        trials,
        calibration_samples: 2000,
        ..ExperimentConfig::default()
    }
}

#[test]
fn deep_fade_is_chance_level() {
    let cfg = ExperimentConfig {
        comm_snr_db: -20.0,
        ..small(4000)
    };
    let r = run_sweep(&cfg, Execution::Parallel).unwrap();
    for recs in &r.records {
        assert!((recs[0].acc_mean - 0.2).abs() < 0.05, "{}", recs[0].acc_mean);
        assert_eq!(recs[0].trials(), 4000);
    }
}

#[test]
fn sequential_and_parallel_agree() {
    let cfg = ExperimentConfig {
        sweep: Some(SweepSpec {
            variable: SweepVariable::CommSnr,
            values: vec![0.0, 20.0],
        }),
        ..small(200)
    };
    assert_eq!(
        run_sweep(&cfg, Execution::Sequential).unwrap(),
        run_sweep(&cfg, Execution::Parallel).unwrap()
    );
}

#[test]
fn seed_changes_the_draws() {
    let a = run_sweep(&small(300), Execution::Parallel).unwrap();
    let b = run_sweep(&ExperimentConfig { seed: 1, ..small(300) }, Execution::Parallel).unwrap();
    assert_ne!(a.records, b.records);
}

fn read_all(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn drivers_write_identical_bytes_on_rerun() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let cfg = ExperimentConfig {
            output: d.path().to_path_buf(),
            ..small(60)
        };
        accuracy_sweep(&cfg, Execution::Parallel).unwrap();
        compare(&cfg, Scheme::Fdm, Execution::Parallel).unwrap();
        estimator_sweep(&cfg, Execution::Parallel).unwrap();
        entropy_sweep(&cfg).unwrap();
    }
    let (a, b) = (read_all(dirs[0].path()), read_all(dirs[1].path()));
    assert!(a.len() >= 8);
    assert_eq!(a, b);
    let acc = String::from_utf8(a.iter().find(|f| f.0 == "accuracy_fdm_mse.csv").unwrap().1.clone()).unwrap();
    assert!(acc.starts_with("sweep_value,acc_mean,acc_std,mse_mean,md_mean\n"));
}

#[test]
fn tdm_compare_runs_both_threshold_designs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        output: dir.path().to_path_buf(),
        ..small(40)
    };
    let (r, files) = compare(&cfg, Scheme::Tdm, Execution::Parallel).unwrap();
    assert_eq!(r.solvers, vec![SolverKind::TdmMse, SolverKind::TdmMd]);
    assert!(files.iter().all(|f| f.exists()));
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = small(17);
    assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    assert!(ExperimentConfig::from_toml("trials = 5\nbogus = 1\n").is_err());
    let k = ExperimentConfig::from_toml("K = 6\n").unwrap();
    assert_eq!(k.num_devices, 6);
}

#[test]
fn mismatched_scheme_is_rejected() {
    let cfg = ExperimentConfig {
        scheme: Scheme::Tdm,
        ..small(10)
    };
    assert!(cfg.validate().is_err());
}
