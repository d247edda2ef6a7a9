//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use isea::aircomp::{aggregate_with, analytic_mse};
use isea::entropy::{cond_entropy_ml, cond_entropy_mmse};
use isea::par::Execution;
use isea::pipeline::experiments::{
    accuracy_sweep, compare, entropy_sweep, estimator_sweep, random_instance, validate_solvers,
};
use isea::pipeline::{run_sweep, ExperimentConfig, SweepSpec, SweepVariable};
use isea::rng::{derive, rng_from};
use isea::sensing::{estimate, observe};
use isea::stats::spearman;
use isea::transceiver::{fdm_md_optimal, fdm_mse_dual, md_objective, mse_objective, optimal_rx, SolverKind};
use isea::{
    ChannelRealization, DeviceProfile, EstimatedFeature, EstimatorKind, GaussianMixturePrior, Scheme, SolverOptions,
    TransceiverDesign,
};
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn estimator_mse() -> Outcome {
    let base = GaussianMixturePrior::synthetic(5, 4, 4.0, 1).unwrap();
    let prior = GaussianMixturePrior::new(base.means().clone(), vec![1.0; 4], base.mixing().to_vec()).unwrap();
    let trials = 100_000;
    let samples = prior.sample(trials, 3);
    let mut worst: f64 = 0.0;
    for (i, s2) in [0.1, 1.0, 10.0].into_iter().enumerate() {
        let profile = DeviceProfile::new(s2, 1.0, vec![1.0; 4]).unwrap();
        let mut ml = [0.0; 4];
        let mut mmse = [0.0; 4];
        for (t, x) in samples.iter().enumerate() {
            let o = observe(x, 0, &profile, derive(9, &[i as u64, t as u64])).unwrap();
            let a = estimate(EstimatorKind::Ml, &o, &prior, x.label).unwrap();
            let b = estimate(EstimatorKind::Mmse, &o, &prior, x.label).unwrap();
            for m in 0..4 {
                ml[m] += (a.x_hat[m] - x.x[m]).powi(2);
                mmse[m] += (b.x_hat[m] - x.x[m]).powi(2);
            }
        }
        for m in 0..4 {
            let n = trials as f64;
            worst = worst.max((ml[m] / n - s2).abs() / s2);
            let want = s2 / (1.0 + s2);
            worst = worst.max((mmse[m] / n - want).abs() / want);
        }
    }
    outcome(worst < 0.02, format!("worst relative error {worst:.4} (tol 0.02)"))
}

fn estimator_ordering() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        trials: 10_000,
        output: dir.path().to_path_buf(),
        ..ExperimentConfig::default()
    };
    let (recs, _) = estimator_sweep(&cfg, Execution::Parallel).unwrap();
    let mut ok = true;
    let mut gap20 = f64::NAN;
    for chunk in recs.chunks(3) {
        let [ml, mmse, rwb] = [0, 1, 2].map(|i| &chunk[i]);
        assert_eq!((ml.estimator, mmse.estimator, rwb.estimator), (EstimatorKind::Ml, EstimatorKind::Mmse, EstimatorKind::Rwb));
        ok &= mmse.mse_mean <= rwb.mse_mean;
        ok &= rwb.mse_mean <= ml.mse_mean + 3.0 * ml.mse_se;
        if ml.sensing_snr_db == 20.0 {
            gap20 = (ml.mse_rb - rwb.mse_rb).abs() / ml.mse_rb;
        }
    }
    let passed = ok && gap20 < 0.01;
    outcome(
        passed,
        format!("ordering holds at every point: {ok}; rwb-ml gap at 20 dB {gap20:.5} (tol 0.01)"),
    )
}

fn entropy_ordering() -> Outcome {
    let mut rng = rng_from(13);
    let mut ok = true;
    let mut worst_eq: f64 = 0.0;
    for _ in 0..1000 {
        let prior = 10f64.powf(rng.random_range(-2.0..2.0));
        let k = rng.random_range(1..16);
        let vars: Vec<f64> = (0..k).map(|_| 10f64.powf(rng.random_range(-3.0..2.0))).collect();
        // one device makes the two equal; allow rounding
        ok &= cond_entropy_mmse(prior, &vars).unwrap() <= cond_entropy_ml(prior, &vars).unwrap() + 1e-12;
        let same = vec![vars[0]; k];
        worst_eq = worst_eq.max((cond_entropy_mmse(prior, &same).unwrap() - cond_entropy_ml(prior, &same).unwrap()).abs());
    }
    outcome(ok && worst_eq <= 1e-12, format!("ordering holds: {ok}; worst equal-variance gap {worst_eq:.2e}"))
}

fn aircomp_error() -> Outcome {
    let mut rng = rng_from(17);
    let draws = 1_000_000;
    let (k, n) = (3, 4);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let gains = Array2::from_shape_fn((k, n), |_| rng.random_range(0.1..2.0));
        let channel = ChannelRealization::new(gains, rng.random_range(0.01..1.0), Scheme::Fdm).unwrap();
        let moments = Array2::from_shape_fn((k, n), |_| rng.random_range(0.5..2.0));
        let budgets: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..2.0)).collect();
        // random energy split using at most the whole budget
        let mut tx = Array2::zeros((k, n));
        for d in 0..k {
            let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let used = rng.random_range(0.2..1.0) * budgets[d] / w.iter().sum::<f64>();
            for c in 0..n {
                tx[[d, c]] = (used * w[c] / moments[[d, c]]).sqrt();
            }
        }
        let rx: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.5)).collect();
        let design = TransceiverDesign { tx, rx, scheme: Scheme::Fdm };
        design.check_power(&budgets, &moments).unwrap();
        let sigma = Array2::from_shape_fn((k, n), |_| rng.random_range(0.1..2.0));
        let want: f64 = analytic_mse(&channel, &design, &sigma).iter().sum();
        let sd = sigma.mapv(f64::sqrt);
        let mut ests: Vec<EstimatedFeature> = (0..k)
            .map(|d| EstimatedFeature { device: d, x_hat: vec![0.0; n], kind: EstimatorKind::Ml, posterior_var: vec![0.0; n] })
            .collect();
        let mut total = 0.0;
        for _ in 0..draws {
            for (d, e) in ests.iter_mut().enumerate() {
                for c in 0..n {
                    e.x_hat[c] = sd[[d, c]] * rng.sample::<f64, _>(StandardNormal);
                }
            }
            let out = aggregate_with(&mut rng, &ests, &channel, &design).unwrap();
            for c in 0..n {
                let target: f64 = ests.iter().map(|e| e.x_hat[c]).sum();
                total += (out.y_hat[c] - target).powi(2);
            }
        }
        worst = worst.max((total / draws as f64 - want).abs() / want);
    }
    outcome(worst < 0.01, format!("worst relative error {worst:.5} (tol 0.01)"))
}

fn solver_checks(wanted: &[&str]) -> Outcome {
    let checks = validate_solvers(2024, 100, Execution::Parallel).unwrap();
    let mut passed = true;
    let mut parts = Vec::new();
    for c in checks.iter().filter(|c| wanted.contains(&c.name)) {
        passed &= c.passed;
        parts.push(format!("{} {:.2e}", c.name, c.worst));
    }
    assert_eq!(parts.len(), wanted.len());
    outcome(passed, parts.join("; "))
}

fn fdm_dominance() -> Outcome {
    let opts = SolverOptions::default();
    let tol = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..100u64 {
        let snr = [0.0, 10.0, 20.0][i as usize % 3];
        let inst = random_instance(&mut rng_from(derive(31, &[i])), 4, 4, snr, false);
        let m = fdm_mse_dual(&inst, &opts).unwrap();
        let d = fdm_md_optimal(&inst, &opts).unwrap();
        let d_mse = mse_objective(&inst, &d.design.tx, &optimal_rx(&inst, &d.design.tx));
        worst = worst.max((m.objective - d_mse) / m.objective);
        worst = worst.max((md_objective(&inst, &m.design.tx) - d.objective) / d.objective);
    }
    outcome(worst <= tol, format!("worst relative violation {worst:.2e} (tol {tol:.0e})"))
}

fn accuracy_shape() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        output: dir.path().to_path_buf(),
        ..ExperimentConfig::default()
    };
    let (r, _) = compare(&cfg, Scheme::Fdm, Execution::Parallel).unwrap();
    let values: Vec<f64> = r.ceiling.iter().map(|c| c.sweep_value).collect();
    let at = |v: f64| values.iter().position(|&x| x == v).unwrap();
    let (lo, hi) = (at(-20.0), at(40.0));

    let floor_ok = r.records.iter().all(|s| (s[lo].acc_mean - 0.2).abs() <= 0.05);
    let ceiling = r.ceiling[hi].acc_mean;
    let mut ceiling_ok = true;
    let mut high = Vec::new();
    for (s, recs) in r.solvers.iter().zip(&r.records) {
        high.push(format!("{} {:.3}", s.name(), recs[hi].acc_mean));
        if *s != SolverKind::ChannelInversion {
            ceiling_ok &= (recs[hi].acc_mean - ceiling).abs() <= 0.02;
        }
    }
    let mse = r.records_for(SolverKind::FdmMse).unwrap();
    let md = r.records_for(SolverKind::FdmMd).unwrap();
    let mut not_worse = true;
    let mut higher = 0;
    let mut mid = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        if (0.0..=20.0).contains(&v) {
            not_worse &= md[i].acc_mean >= mse[i].acc_mean - mse[i].acc_std;
            if md[i].acc_mean > mse[i].acc_mean {
                higher += 1;
            }
            mid.push(format!("{v}: {:.3}/{:.3}", md[i].acc_mean, mse[i].acc_mean));
        }
    }
    let passed = floor_ok && ceiling_ok && not_worse && higher >= 3;
    outcome(
        passed,
        format!(
            "floor {floor_ok}; ceiling {ceiling_ok} (map {ceiling:.3}, {}); md not worse {not_worse}; md higher at {higher} of {} mid points (md/mse {})",
            high.join(", "),
            mid.len(),
            mid.join(", ")
        ),
    )
}

fn device_scaling() -> Outcome {
    let cfg = ExperimentConfig {
        comm_snr_db: 10.0,
        solvers: vec![SolverKind::FdmMse, SolverKind::FdmMd],
        sweep: Some(SweepSpec {
            variable: SweepVariable::Devices,
            values: vec![1.0, 2.0, 4.0, 8.0, 16.0],
        }),
        ..ExperimentConfig::default()
    };
    let r = run_sweep(&cfg, Execution::Parallel).unwrap();
    let ks: Vec<f64> = r.ceiling.iter().map(|c| c.sweep_value).collect();
    let mut passed = true;
    let mut parts = Vec::new();
    for (s, recs) in r.solvers.iter().zip(&r.records) {
        let acc: Vec<f64> = recs.iter().map(|x| x.acc_mean).collect();
        let rho = spearman(&ks, &acc);
        passed &= rho >= 0.8;
        parts.push(format!("{} rho {rho:.2}", s.name()));
    }
    let gap = |i: usize| (r.records[0][i].acc_mean - r.records[1][i].acc_mean).abs();
    passed &= gap(4) <= gap(1);
    parts.push(format!("gap at K=2 {:.3}, at K=16 {:.3}", gap(1), gap(4)));
    outcome(passed, parts.join("; "))
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
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

fn determinism() -> Outcome {
    let run = |exec: Execution| {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            trials: 100,
            seed: 7,
            output: dir.path().to_path_buf(),
            ..ExperimentConfig::default()
        };
        estimator_sweep(&cfg, exec).unwrap();
        entropy_sweep(&cfg).unwrap();
        compare(&cfg, Scheme::Tdm, exec).unwrap();
        compare(&cfg, Scheme::Fdm, exec).unwrap();
        accuracy_sweep(&cfg, exec).unwrap();
        snapshot(dir.path())
    };
    let a = run(Execution::Parallel);
    let b = run(Execution::Parallel);
    let c = run(Execution::Sequential);
    let passed = !a.is_empty() && a == b && a == c;
    outcome(passed, format!("{} files identical across two parallel runs and one sequential run: {passed}", a.len()))
}

fn main() -> ExitCode {
    // the harness is also started by `cargo test -- <filter>` style invocations
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    isea::par::init_threads_from_env();
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("estimator mse", estimator_mse),
        ("estimator ordering", estimator_ordering),
        ("entropy ordering", entropy_ordering),
        ("aggregation error", aircomp_error),
        ("solvers vs oracle", || {
            solver_checks(&[
                "tdm_mse matches oracle",
                "tdm_md matches oracle",
                "fdm_mse matches oracle",
                "fdm_md matches oracle",
                "fdm kkt residual",
            ])
        }),
        ("tdm equivalence", || solver_checks(&["tdm designs equivalent"])),
        ("fdm dominance", fdm_dominance),
        ("accuracy floor and ceiling", accuracy_shape),
        ("device scaling", device_scaling),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = f();
        println!(
            "criterion {:>2} {:<28} {} [{:.1}s] {}",
            i + 1,
            name,
            if o.passed { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
        failed += usize::from(!o.passed);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
