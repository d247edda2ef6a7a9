//! Monte Carlo batches over one swept parameter.

use crate::error::{Error, Result};
use crate::par::{map_indexed, Execution};
use crate::rng::{derive, stream};
use crate::stats::{sample_std, KahanSum};
use crate::transceiver::SolverKind;

use super::config::{ExperimentConfig, SweepSpec, SweepVariable};
use super::trial::{run_trial, PointSettings, Scenario, TrialRecord};

/// Largest fraction of solver runs that may be dropped for non-convergence.
pub const EXCLUSION_LIMIT: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub sweep_value: f64,
    pub acc_mean: f64,
    /// Unbiased sample standard deviation of the per-trial 0/1 accuracy.
    pub acc_std: f64,
    pub mse_mean: f64,
    pub md_mean: f64,
    /// `confusion[true][predicted]` counts.
    pub confusion: Vec<Vec<u64>>,
}

impl MetricsRecord {
    /// Builds a record from `(label, predicted, mse, md)` tuples in trial
    /// order.
    pub fn from_trials(sweep_value: f64, num_classes: usize, trials: &[(usize, usize, f64, f64)]) -> Self {
        let mut confusion = vec![vec![0u64; num_classes]; num_classes];
        let hits: Vec<f64> = trials
            .iter()
            .map(|&(l, p, _, _)| {
                confusion[l][p] += 1;
                if l == p {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let n = trials.len() as f64;
        let mean_of = |f: fn(&(usize, usize, f64, f64)) -> f64| {
            if trials.is_empty() {
                f64::NAN
            } else {
                trials.iter().map(f).collect::<KahanSum>().value() / n
            }
        };
        Self {
            sweep_value,
            acc_mean: Self::trace_ratio(&confusion),
            acc_std: sample_std(&hits),
            mse_mean: mean_of(|t| t.2),
            md_mean: mean_of(|t| t.3),
            confusion,
        }
    }

    fn trace_ratio(confusion: &[Vec<u64>]) -> f64 {
        let total: u64 = confusion.iter().flatten().sum();
        let trace: u64 = (0..confusion.len()).map(|i| confusion[i][i]).sum();
        if total == 0 {
            f64::NAN
        } else {
            trace as f64 / total as f64
        }
    }

    pub fn trials(&self) -> u64 {
        self.confusion.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub variable: SweepVariable,
    pub solvers: Vec<SolverKind>,
    /// `records[s][p]`: solver `s` at sweep point `p`.
    pub records: Vec<Vec<MetricsRecord>>,
    /// MAP accuracy on the noise-free average of the estimates.
    pub ceiling: Vec<MetricsRecord>,
    pub excluded: usize,
    pub total_runs: usize,
}

impl SweepResult {
    pub fn records_for(&self, solver: SolverKind) -> Option<&[MetricsRecord]> {
        self.solvers
            .iter()
            .position(|&s| s == solver)
            .map(|i| self.records[i].as_slice())
    }
}

/// Settings at one sweep point.
pub fn point_settings(cfg: &ExperimentConfig, variable: SweepVariable, value: f64) -> PointSettings {
    let mut p = PointSettings::from_config(cfg);
    match variable {
        SweepVariable::CommSnr => p.comm_snr_db = value,
        SweepVariable::SensingSnr => p.sensing_snr_db = value,
        SweepVariable::Devices => p.num_devices = value as usize,
        SweepVariable::Subcarriers => p.num_subcarriers = value as usize,
    }
    p
}

/// Runs every trial of one point. Trial `t` uses the same seed at every
/// point, so neighbouring points share their random draws.
pub fn run_point(cfg: &ExperimentConfig, scn: &Scenario, exec: Execution) -> Result<Vec<TrialRecord>> {
    map_indexed(cfg.trials, exec, |t| {
        run_trial(scn, derive(cfg.seed, &[stream::TRIAL, t as u64]))
    })
    .into_iter()
    .collect()
}

/// The sweep described by the config, or a single point at the configured
/// communication SNR.
pub fn effective_sweep(cfg: &ExperimentConfig) -> SweepSpec {
    cfg.sweep.clone().unwrap_or(SweepSpec {
        variable: SweepVariable::CommSnr,
        values: vec![cfg.comm_snr_db],
    })
}

pub fn run_sweep(cfg: &ExperimentConfig, exec: Execution) -> Result<SweepResult> {
    cfg.validate()?;
    let prior = cfg.build_prior()?;
    let spec = effective_sweep(cfg);
    let l = prior.num_classes();
    let mut records = vec![Vec::with_capacity(spec.values.len()); cfg.solvers.len()];
    let mut ceiling = Vec::with_capacity(spec.values.len());
    let mut excluded = 0;
    let mut total_runs = 0;
    for &value in &spec.values {
        let scn = Scenario::build(cfg, &prior, point_settings(cfg, spec.variable, value))?;
        let trials = run_point(cfg, &scn, exec)?;
        let k = scn.num_devices() as f64;
        let clean_md: f64 = (0..prior.feature_dim())
            .map(|m| {
                let s: f64 = scn.est_vars.column(m).sum();
                scn.delta.delta[m] * k * k / s
            })
            .sum();
        let ceil: Vec<_> = trials.iter().map(|t| (t.label, t.ceiling, 0.0, clean_md)).collect();
        ceiling.push(MetricsRecord::from_trials(value, l, &ceil));
        for (s, out) in records.iter_mut().enumerate() {
            let used: Vec<_> = trials
                .iter()
                .filter_map(|t| t.outcomes[s].map(|o| (t.label, o.predicted, o.mse, o.md)))
                .collect();
            excluded += trials.len() - used.len();
            total_runs += trials.len();
            out.push(MetricsRecord::from_trials(value, l, &used));
        }
    }
    if excluded as f64 > EXCLUSION_LIMIT * total_runs as f64 {
        return Err(Error::ExclusionBudget {
            excluded,
            total: total_runs,
            limit_percent: EXCLUSION_LIMIT * 100.0,
        });
    }
    Ok(SweepResult {
        variable: spec.variable,
        solvers: cfg.solvers.clone(),
        records,
        ceiling,
        excluded,
        total_runs,
    })
}
