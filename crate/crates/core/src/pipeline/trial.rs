//! One Monte Carlo pass through sense, estimate, transmit, aggregate and
//! classify.

use std::collections::HashMap;

use ndarray::Array2;

use crate::aircomp::{aggregate_with, analytic_mse, ideal_average, received_md, sample_channel_with, Scheme, TransceiverDesign};
use crate::error::{Error, Result};
use crate::gm_prior::{DiscriminativePrior, GaussianMixturePrior};
use crate::rng::{derive, rng_from, stream};
use crate::sensing::{estimate, observe_with, sensing_vars_for_snr, EstimatedFeature, EstimatorKind};
use crate::transceiver::{solve, FdmInstance, SolverKind, SolverOptions};

use super::calibration::calibrate;
use super::config::{DecodeScaling, ExperimentConfig};

/// Everything a trial needs, fixed for one sweep point.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub prior: GaussianMixturePrior,
    pub delta: DiscriminativePrior,
    pub estimator: EstimatorKind,
    pub scheme: Scheme,
    pub solvers: Vec<SolverKind>,
    pub sensing_vars: Vec<f64>,
    pub budgets: Vec<f64>,
    pub noise_var: f64,
    pub channel_scale: f64,
    pub num_subcarriers: usize,
    /// `nu^2`, devices by feature elements.
    pub moments: Array2<f64>,
    /// `sigma_hat^2`, devices by feature elements.
    pub est_vars: Array2<f64>,
    pub solver_options: SolverOptions,
    pub decode: DecodeScaling,
}

/// Values of the swept knobs at one sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSettings {
    pub num_devices: usize,
    pub num_subcarriers: usize,
    pub comm_snr_db: f64,
    pub sensing_snr_db: f64,
}

impl PointSettings {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        Self {
            num_devices: cfg.num_devices,
            num_subcarriers: cfg.num_subcarriers,
            comm_snr_db: cfg.comm_snr_db,
            sensing_snr_db: cfg.sensing_snr_db,
        }
    }
}

impl Scenario {
    /// Draws sensing variances and runs the calibration for one point.
    /// Devices with equal sensing variance share one calibration run.
    pub fn build(cfg: &ExperimentConfig, prior: &GaussianMixturePrior, point: PointSettings) -> Result<Self> {
        let k = point.num_devices;
        let sensing_vars = match &cfg.sensing_vars {
            Some(v) => v.clone(),
            None => sensing_vars_for_snr(
                prior,
                k,
                point.sensing_snr_db,
                cfg.heterogeneity,
                derive(cfg.seed, &[stream::SENSING_VARS, k as u64]),
            )?,
        };
        let m = prior.feature_dim();
        let mut moments = Array2::zeros((k, m));
        let mut est_vars = Array2::zeros((k, m));
        let mut cache: HashMap<u64, (Vec<f64>, Vec<f64>)> = HashMap::new();
        for (dev, &s2) in sensing_vars.iter().enumerate() {
            if !cache.contains_key(&s2.to_bits()) {
                let c = calibrate(
                    prior,
                    cfg.estimator,
                    s2,
                    cfg.calibration_samples,
                    derive(cfg.seed, &[stream::CALIBRATION, s2.to_bits()]),
                )?;
                let sh = c.sigma_hat(cfg.sigma_hat_source).to_vec();
                cache.insert(s2.to_bits(), (c.moments, sh));
            }
            let (nu2, sh) = &cache[&s2.to_bits()];
            for j in 0..m {
                moments[[dev, j]] = nu2[j];
                est_vars[[dev, j]] = sh[j];
            }
        }
        Ok(Self {
            prior: prior.clone(),
            delta: prior.discriminative_prior()?,
            estimator: cfg.estimator,
            scheme: cfg.scheme,
            solvers: cfg.solvers.clone(),
            sensing_vars,
            budgets: vec![cfg.power_budget(point.comm_snr_db); k],
            noise_var: cfg.noise_var,
            channel_scale: cfg.channel_scale,
            num_subcarriers: point.num_subcarriers,
            moments,
            est_vars,
            solver_options: cfg.solver,
            decode: cfg.decode,
        })
    }

    pub fn num_devices(&self) -> usize {
        self.sensing_vars.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOutcome {
    pub predicted: usize,
    /// Analytic aggregation MSE summed over the feature elements.
    pub mse: f64,
    /// Received Mahalanobis distance summed over the feature elements.
    pub md: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub label: usize,
    /// MAP decision on the noise-free average of the estimates.
    pub ceiling: usize,
    /// One entry per configured solver; `None` when the solver failed to
    /// converge and the trial is excluded for it.
    pub outcomes: Vec<Option<SolverOutcome>>,
}

/// Per-device estimates of one sampled feature.
pub(crate) fn sense(scn: &Scenario, trial_seed: u64) -> Result<(usize, Vec<f64>, Vec<EstimatedFeature>)> {
    let mut rng = rng_from(derive(trial_seed, &[stream::FEATURE]));
    let sample = scn.prior.sample_with(&mut rng, 1).pop().expect("one sample");
    let estimates = scn
        .sensing_vars
        .iter()
        .enumerate()
        .map(|(k, &s2)| {
            let mut r = rng_from(derive(trial_seed, &[stream::SENSING, k as u64]));
            let obs = observe_with(&mut r, &sample.x, k, s2);
            estimate(scn.estimator, &obs, &scn.prior, sample.label)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((sample.label, sample.x, estimates))
}

/// Pads a design over the used columns to the full channel width.
fn widen(design: &TransceiverDesign, columns: usize) -> TransceiverDesign {
    let (k, used) = design.tx.dim();
    let mut tx = Array2::zeros((k, columns));
    tx.slice_mut(ndarray::s![.., ..used]).assign(&design.tx);
    let mut rx = design.rx.clone();
    rx.resize(columns, 0.0);
    TransceiverDesign {
        tx,
        rx,
        scheme: design.scheme,
    }
}

pub(crate) fn decode(
    scn: &Scenario,
    y_hat: &[f64],
    gains: &Array2<f64>,
    design: &TransceiverDesign,
) -> Vec<f64> {
    let k = scn.num_devices() as f64;
    match scn.decode {
        DecodeScaling::Average => y_hat.iter().map(|v| v / k).collect(),
        DecodeScaling::EffectiveGain => y_hat
            .iter()
            .enumerate()
            .map(|(n, v)| {
                let g: f64 = (0..gains.nrows()).map(|i| gains[[i, n]] * design.tx[[i, n]]).sum::<f64>() * design.rx[n];
                if g > 0.0 {
                    v / g
                } else {
                    0.0
                }
            })
            .collect(),
    }
}

/// Runs the full chain once for every configured solver. Sub-seeds for the
/// feature draw, each device's sensing noise, the channel and the receiver
/// noise derive from `trial_seed`; all solvers see the same draws.
pub fn run_trial(scn: &Scenario, trial_seed: u64) -> Result<TrialRecord> {
    let (label, _, estimates) = sense(scn, trial_seed)?;
    let ceiling = scn.prior.map_classify(&ideal_average(&estimates)?)?;

    let mut chan_rng = rng_from(derive(trial_seed, &[stream::CHANNEL]));
    let channel = sample_channel_with(
        &mut chan_rng,
        scn.num_devices(),
        scn.num_subcarriers,
        scn.scheme,
        scn.channel_scale,
        scn.noise_var,
    )?;
    let delta = &scn.delta.delta;
    let inst = FdmInstance::from_channel(&channel, &scn.budgets, &scn.moments, &scn.est_vars, delta)?;

    let mut outcomes = Vec::with_capacity(scn.solvers.len());
    for &kind in &scn.solvers {
        let report = match solve(kind, &inst, scn.scheme, &scn.solver_options) {
            Ok(r) => r,
            Err(Error::NonConvergence { .. }) => {
                outcomes.push(None);
                continue;
            }
            Err(e) => return Err(e),
        };
        report.design.check_power(&inst.budgets, &inst.moments)?;
        let design = widen(&report.design, channel.num_columns());
        let mut noise_rng = rng_from(derive(trial_seed, &[stream::RECEIVER_NOISE]));
        let agg = aggregate_with(&mut noise_rng, &estimates, &channel, &design)?;
        let features = decode(scn, &agg.y_hat, &channel.gains, &design);
        let predicted = scn.prior.map_classify(&features)?;
        let mse = analytic_mse(&channel, &design, &scn.est_vars).iter().sum();
        let md = received_md(&channel, &design, &scn.est_vars, &scn.delta).iter().sum();
        outcomes.push(Some(SolverOutcome { predicted, mse, md }));
    }
    Ok(TrialRecord {
        label,
        ceiling,
        outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aircomp::ChannelRealization;

    fn scenario(cfg: &ExperimentConfig) -> Scenario {
        let prior = cfg.build_prior().unwrap();
        Scenario::build(cfg, &prior, PointSettings::from_config(cfg)).unwrap()
    }

    #[test]
    fn trials_are_reproducible() {
        let cfg = ExperimentConfig {
            calibration_samples: 500,
            ..ExperimentConfig::default()
        };
        let s = scenario(&cfg);
        let a = run_trial(&s, 42).unwrap();
        assert_eq!(a, run_trial(&s, 42).unwrap());
        assert_eq!(a.outcomes.len(), 4);
        assert!(a.outcomes.iter().all(|o| o.is_some()));
    }

    #[test]
    fn noiseless_chain_recovers_the_clean_decision() {
        let cfg = ExperimentConfig {
            sensing_vars: Some(vec![0.0; 3]),
            estimator: EstimatorKind::Ml,
            noise_var: 0.0,
            calibration_samples: 200,
            ..ExperimentConfig::default()
        };
        let s = scenario(&cfg);
        for seed in 0..50 {
            let (_, x, est) = sense(&s, seed).unwrap();
            let mut rng = rng_from(seed);
            let ch = sample_channel_with(&mut rng, 3, 4, Scheme::Fdm, 1.0, 0.0).unwrap();
            // perfect alignment: every device inverts its channel
            let design = TransceiverDesign {
                tx: ch.gains.mapv(|h| 1.0 / h),
                rx: vec![1.0; 4],
                scheme: Scheme::Fdm,
            };
            let ch = ChannelRealization::new(ch.gains, 0.0, Scheme::Fdm).unwrap();
            let agg = aggregate_with(&mut rng, &est, &ch, &design).unwrap();
            let y = decode(&s, &agg.y_hat, &ch.gains, &design);
            assert_eq!(s.prior.map_classify(&y).unwrap(), s.prior.map_classify(&x).unwrap());
        }
    }

    #[test]
    fn equal_sensing_variances_share_statistics() {
        let cfg = ExperimentConfig {
            calibration_samples: 300,
            ..ExperimentConfig::default()
        };
        let s = scenario(&cfg);
        assert_eq!(s.est_vars.row(0), s.est_vars.row(2));
        assert_eq!(s.moments.row(1), s.moments.row(2));
    }
}
