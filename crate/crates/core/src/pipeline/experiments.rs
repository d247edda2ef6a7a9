//! Drivers behind the CLI subcommands. Each writes its CSVs under the
//! configured output directory and returns the paths written.

use std::path::PathBuf;

use ndarray::Array2;
use rand::Rng;

use crate::aircomp::Scheme;
use crate::entropy::entropy_report;
use crate::error::{Error, Result};
use crate::par::{map_indexed, Execution};
use crate::rng::{derive, rng_from, stream, SimRng};
use crate::sensing::{estimate, observe_with, sensing_vars_for_snr, EstimatorKind};
use crate::stats::{mean, sample_std, standard_error};
use crate::transceiver::{
    brute_force_oracle, fdm_md_optimal, fdm_mse_dual, md_objective, mse_objective, solve, tdm_md_optimal,
    tdm_mse_optimal, FdmInstance, OracleObjective, SolverKind, SolverOptions, TdmInstance,
};

use super::config::{ExperimentConfig, SweepSpec, SweepVariable};
use super::export::{export, fmt9, write_rows};
use super::sweep::{run_sweep, SweepResult};

pub const DEFAULT_COMM_SNR_GRID: [f64; 9] = [-20.0, -10.0, 0.0, 5.0, 10.0, 15.0, 20.0, 30.0, 40.0];
pub const DEFAULT_SENSING_SNR_GRID: [f64; 7] = [-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0];

fn with_default_sweep(cfg: &ExperimentConfig, variable: SweepVariable, grid: &[f64]) -> ExperimentConfig {
    let mut c = cfg.clone();
    if c.sweep.is_none() {
        c.sweep = Some(SweepSpec {
            variable,
            values: grid.to_vec(),
        });
    }
    c
}

fn sensing_grid(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    match &cfg.sweep {
        None => Ok(DEFAULT_SENSING_SNR_GRID.to_vec()),
        Some(s) if s.variable == SweepVariable::SensingSnr => Ok(s.values.clone()),
        Some(s) => Err(Error::validation(format!(
            "this experiment sweeps the sensing SNR, not {}",
            s.variable.name()
        ))),
    }
}

/// Writes one summary/confusion pair per solver plus the ceiling.
pub fn write_sweep(result: &SweepResult, cfg: &ExperimentConfig, stem: &str) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    let mut emit = |name: &str, recs| -> Result<()> {
        let a = cfg.output.join(format!("{stem}_{name}.csv"));
        let b = cfg.output.join(format!("{stem}_{name}_confusion.csv"));
        export(recs, &a, &b)?;
        files.push(a);
        files.push(b);
        Ok(())
    };
    for (s, recs) in result.solvers.iter().zip(&result.records) {
        emit(s.name(), recs)?;
    }
    emit("ceiling", &result.ceiling)?;
    Ok(files)
}

/// Accuracy, MSE and MD of every configured solver over the sweep (by
/// default the communication SNR grid).
pub fn accuracy_sweep(cfg: &ExperimentConfig, exec: Execution) -> Result<(SweepResult, Vec<PathBuf>)> {
    let c = with_default_sweep(cfg, SweepVariable::CommSnr, &DEFAULT_COMM_SNR_GRID);
    let r = run_sweep(&c, exec)?;
    let files = write_sweep(&r, &c, "accuracy")?;
    Ok((r, files))
}

/// Both proxy-optimal designs and, for FDM, the two baselines under one
/// multiplexing scheme.
pub fn compare(cfg: &ExperimentConfig, scheme: Scheme, exec: Execution) -> Result<(SweepResult, Vec<PathBuf>)> {
    let mut c = with_default_sweep(cfg, SweepVariable::CommSnr, &DEFAULT_COMM_SNR_GRID);
    c.scheme = scheme;
    c.solvers = match scheme {
        Scheme::Tdm => vec![SolverKind::TdmMse, SolverKind::TdmMd],
        Scheme::Fdm => vec![
            SolverKind::FdmMse,
            SolverKind::FdmMd,
            SolverKind::Equal,
            SolverKind::ChannelInversion,
        ],
    };
    let r = run_sweep(&c, exec)?;
    let stem = match scheme {
        Scheme::Tdm => "tdm_compare",
        Scheme::Fdm => "fdm_compare",
    };
    let files = write_sweep(&r, &c, stem)?;
    Ok((r, files))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorRecord {
    pub sensing_snr_db: f64,
    pub estimator: EstimatorKind,
    /// Accuracy of the MAP decision on the noise-free average of the
    /// estimates.
    pub acc_mean: f64,
    pub acc_std: f64,
    /// Empirical per-element squared error.
    pub mse_mean: f64,
    pub mse_se: f64,
    /// Per-element posterior variance averaged over trials: an unbiased,
    /// lower-variance estimate of the same MSE.
    pub mse_rb: f64,
    pub mse_rb_se: f64,
}

/// Estimation error and noise-free-aggregation accuracy of every estimator
/// over the sensing SNR grid. All estimators see the same observations.
pub fn estimator_sweep(cfg: &ExperimentConfig, exec: Execution) -> Result<(Vec<EstimatorRecord>, Vec<PathBuf>)> {
    cfg.validate()?;
    let prior = cfg.build_prior()?;
    let grid = sensing_grid(cfg)?;
    let kinds = EstimatorKind::ALL;
    let mut records = Vec::new();
    for &snr in &grid {
        let vars = match &cfg.sensing_vars {
            Some(v) => v.clone(),
            None => sensing_vars_for_snr(
                &prior,
                cfg.num_devices,
                snr,
                cfg.heterogeneity,
                derive(cfg.seed, &[stream::SENSING_VARS, cfg.num_devices as u64]),
            )?,
        };
        let per_trial = map_indexed(cfg.trials, exec, |t| -> Result<Vec<(bool, f64, f64)>> {
            let seed = derive(cfg.seed, &[stream::TRIAL, t as u64]);
            let mut rng = rng_from(derive(seed, &[stream::FEATURE]));
            let sample = prior.sample_with(&mut rng, 1).pop().expect("one sample");
            let obs: Vec<_> = vars
                .iter()
                .enumerate()
                .map(|(k, &s2)| {
                    let mut r = rng_from(derive(seed, &[stream::SENSING, k as u64]));
                    observe_with(&mut r, &sample.x, k, s2)
                })
                .collect();
            kinds
                .iter()
                .map(|&kind| {
                    let est = obs
                        .iter()
                        .map(|o| estimate(kind, o, &prior, sample.label))
                        .collect::<Result<Vec<_>>>()?;
                    let m = sample.x.len();
                    let count = (est.len() * m) as f64;
                    let mut avg = vec![0.0; m];
                    let (mut se, mut pv) = (0.0, 0.0);
                    for e in &est {
                        for j in 0..m {
                            avg[j] += e.x_hat[j] / est.len() as f64;
                            se += (e.x_hat[j] - sample.x[j]).powi(2);
                            pv += e.posterior_var[j];
                        }
                    }
                    let hit = prior.map_classify(&avg)? == sample.label;
                    Ok((hit, se / count, pv / count))
                })
                .collect()
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        for (i, &kind) in kinds.iter().enumerate() {
            let hits: Vec<f64> = per_trial.iter().map(|r| if r[i].0 { 1.0 } else { 0.0 }).collect();
            let se: Vec<f64> = per_trial.iter().map(|r| r[i].1).collect();
            let pv: Vec<f64> = per_trial.iter().map(|r| r[i].2).collect();
            records.push(EstimatorRecord {
                sensing_snr_db: snr,
                estimator: kind,
                acc_mean: mean(&hits),
                acc_std: sample_std(&hits),
                mse_mean: mean(&se),
                mse_se: standard_error(&se),
                mse_rb: mean(&pv),
                mse_rb_se: standard_error(&pv),
            });
        }
    }
    let path = cfg.output.join("estimators.csv");
    write_rows(
        &path,
        &[
            "sweep_value",
            "estimator",
            "acc_mean",
            "acc_std",
            "mse_mean",
            "mse_se",
            "mse_rb",
            "mse_rb_se",
        ],
        records.iter().map(|r| {
            vec![
                fmt9(r.sensing_snr_db),
                r.estimator.name().to_string(),
                fmt9(r.acc_mean),
                fmt9(r.acc_std),
                fmt9(r.mse_mean),
                fmt9(r.mse_se),
                fmt9(r.mse_rb),
                fmt9(r.mse_rb_se),
            ]
        }),
    )?;
    Ok((records, vec![path]))
}

/// Conditional entropies of the ML and MMSE aggregates over the sensing SNR
/// grid, using the prior's average variance.
pub fn entropy_sweep(cfg: &ExperimentConfig) -> Result<(Vec<(f64, f64, f64)>, Vec<PathBuf>)> {
    cfg.validate()?;
    let prior = cfg.build_prior()?;
    let var = prior.mean_variance();
    let mut rows = Vec::new();
    for snr in sensing_grid(cfg)? {
        let vars = match &cfg.sensing_vars {
            Some(v) => v.clone(),
            None => sensing_vars_for_snr(
                &prior,
                cfg.num_devices,
                snr,
                cfg.heterogeneity,
                derive(cfg.seed, &[stream::SENSING_VARS, cfg.num_devices as u64]),
            )?,
        };
        let r = entropy_report(var, &vars)?;
        rows.push((snr, r.h_ml, r.h_mmse));
    }
    let path = cfg.output.join("entropy.csv");
    write_rows(
        &path,
        &["sweep_value", "h_ml", "h_mmse"],
        rows.iter().map(|&(s, a, b)| vec![fmt9(s), fmt9(a), fmt9(b)]),
    )?;
    Ok((rows, vec![path]))
}

/// Random positive instance with `k` devices and `n` subcarriers. Gains are
/// Rayleigh; budgets follow `comm_snr_db` relative to the noise; moments,
/// estimate variances and deltas are uniform on moderate ranges. With
/// `homogeneous` all estimate variances share one value.
pub fn random_instance(rng: &mut SimRng, k: usize, n: usize, comm_snr_db: f64, homogeneous: bool) -> FdmInstance {
    let noise_var = 0.1;
    let common = rng.random_range(0.5..2.0);
    let gains = Array2::from_shape_fn((k, n), |_| {
        let re: f64 = rng.sample(rand_distr::StandardNormal);
        let im: f64 = rng.sample(rand_distr::StandardNormal);
        (0.5f64).sqrt() * re.hypot(im) + 1e-3
    });
    let budgets = (0..k)
        .map(|_| noise_var * 10f64.powf(comm_snr_db / 10.0) * rng.random_range(0.5..2.0))
        .collect();
    let moments = Array2::from_shape_fn((k, n), |_| rng.random_range(0.5..2.0));
    let est_vars = Array2::from_shape_fn((k, n), |_| {
        if homogeneous {
            common
        } else {
            rng.random_range(0.5..2.0)
        }
    });
    let delta = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
    FdmInstance {
        gains,
        budgets,
        moments,
        est_vars,
        noise_var,
        delta,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub tolerance: f64,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Oracle resolution used by the validation suite.
pub fn oracle_grid(coefficients: usize) -> usize {
    match coefficients {
        0..=2 => 41,
        3 => 21,
        4 => 13,
        _ => 9,
    }
}

/// Brute-force cross-checks of every solver on `instances` random small
/// problems per check.
pub fn validate_solvers(seed: u64, instances: usize, exec: Execution) -> Result<Vec<InvariantCheck>> {
    let opts = SolverOptions::default();
    let draw = |label: u64, i: usize| rng_from(derive(seed, &[label, i as u64]));
    type Row = [f64; 8];
    let rows: Vec<Result<Row>> = map_indexed(instances, exec, |i| {
        let mut rng = draw(1, i);
        let k = 1 + (i % 3);
        let snr = [0.0, 10.0, 20.0][i % 3];
        let homog = random_instance(&mut rng, k, 1, snr, true);
        let slot: TdmInstance = homog.slot(0);
        let grid = oracle_grid(k);
        let a = tdm_mse_optimal(&slot)?;
        let b = tdm_md_optimal(&slot)?;
        let oa = brute_force_oracle(&homog, OracleObjective::Mse, grid, 40)?;
        let ob = brute_force_oracle(&homog, OracleObjective::Md, grid, 40)?;
        let tdm_mse_gap = rel(a.objective, oa.objective);
        let tdm_md_gap = rel(b.objective, ob.objective);
        let equiv = rel(mse_objective(&homog, &b.design.tx, &b.design.rx), a.objective)
            .max(rel(md_objective(&homog, &a.design.tx), b.objective));

        let mut rng = draw(2, i);
        let (k, n) = [(2, 2), (3, 2), (2, 1)][i % 3];
        let f = random_instance(&mut rng, k, n, snr, false);
        let grid = oracle_grid(k * n);
        let c = fdm_mse_dual(&f, &opts)?;
        let d = fdm_md_optimal(&f, &opts)?;
        let oc = brute_force_oracle(&f, OracleObjective::Mse, grid, 40)?;
        let od = brute_force_oracle(&f, OracleObjective::Md, grid, 40)?;
        let fdm_mse_gap = rel(c.objective, oc.objective);
        let fdm_md_gap = rel(d.objective, od.objective);
        let kkt = c.kkt_residual.max(d.kkt_residual);
        let dominance = ((c.objective - mse_objective(&f, &d.design.tx, &d.design.rx)) / c.objective)
            .max((md_objective(&f, &c.design.tx) - d.objective) / d.objective)
            .max(0.0);
        let mut baseline_gap: f64 = 0.0;
        for kind in [SolverKind::Equal, SolverKind::ChannelInversion] {
            let r = solve(kind, &f, Scheme::Fdm, &opts)?;
            baseline_gap = baseline_gap.max((c.objective - r.objective) / c.objective);
        }
        let mut power: f64 = 0.0;
        for r in [&c, &d] {
            power = power.max(
                r.design
                    .check_power(&f.budgets, &f.moments)
                    .map_or(f64::INFINITY, |_| 0.0),
            );
        }
        Ok([
            tdm_mse_gap,
            tdm_md_gap,
            equiv,
            fdm_mse_gap,
            fdm_md_gap,
            kkt,
            dominance.max(baseline_gap.max(0.0)),
            power,
        ])
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let names: [(&'static str, f64); 8] = [
        ("tdm_mse matches oracle", 1e-3),
        ("tdm_md matches oracle", 1e-3),
        ("tdm designs equivalent", 1e-6),
        ("fdm_mse matches oracle", 1e-3),
        ("fdm_md matches oracle", 1e-3),
        ("fdm kkt residual", 1e-6),
        ("fdm proxy dominance", 1e-6),
        ("designs within budget", 0.0),
    ];
    Ok(names
        .iter()
        .enumerate()
        .map(|(j, &(name, tolerance))| {
            let worst = rows.iter().map(|r| r[j]).fold(0.0, f64::max);
            InvariantCheck {
                name,
                passed: worst <= tolerance,
                worst,
                tolerance,
            }
        })
        .collect())
}
