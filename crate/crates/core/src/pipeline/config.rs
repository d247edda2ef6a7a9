//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aircomp::Scheme;
use crate::error::{Error, Result};
use crate::gm_prior::GaussianMixturePrior;
use crate::sensing::EstimatorKind;
use crate::transceiver::{SolverKind, SolverOptions};

/// Which per-device variance the solvers see as `sigma_hat^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaHatSource {
    /// Pooled within-class variance of the estimates on calibration data.
    #[default]
    WithinClass,
    /// Average of the estimator's own posterior variances.
    PosteriorVar,
}

/// How the decoded vector is brought back to feature scale before
/// classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeScaling {
    /// Divide by the number of devices.
    #[default]
    Average,
    /// Divide element `n` by the end-to-end gain `a_n sum_k |h b|`.
    EffectiveGain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    CommSnr,
    SensingSnr,
    #[serde(alias = "K")]
    Devices,
    #[serde(alias = "N")]
    Subcarriers,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::CommSnr => "comm_snr",
            SweepVariable::SensingSnr => "sensing_snr",
            SweepVariable::Devices => "devices",
            SweepVariable::Subcarriers => "subcarriers",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

/// Where the mixture prior comes from. `path` loads a saved prior,
/// `samples` fits one to a labelled CSV; otherwise a synthetic prior is
/// drawn with the given minimum pairwise distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorSpec {
    pub min_md: f64,
    pub seed: u64,
    pub path: Option<PathBuf>,
    pub samples: Option<PathBuf>,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            min_md: 4.0,
            seed: 1,
            path: None,
            samples: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub trials: usize,
    pub scheme: Scheme,
    pub estimator: EstimatorKind,
    pub solvers: Vec<SolverKind>,
    #[serde(rename = "K")]
    pub num_devices: usize,
    #[serde(rename = "M")]
    pub feature_dim: usize,
    #[serde(rename = "N")]
    pub num_subcarriers: usize,
    #[serde(rename = "L")]
    pub num_classes: usize,
    /// Receiver noise variance `sigma_w^2`.
    pub noise_var: f64,
    /// `E|h|^2` of the Rayleigh channel.
    pub channel_scale: f64,
    /// `10 log10(P_k / sigma_w^2)`, identical for all devices.
    pub comm_snr_db: f64,
    /// Per-device sensing SNR target. The 20 dB default keeps sensing noise
    /// small so the channel limits accuracy in the transceiver experiments.
    pub sensing_snr_db: f64,
    /// Explicit per-device sensing variances; overrides `sensing_snr_db`.
    pub sensing_vars: Option<Vec<f64>>,
    /// Relative spread of the generated sensing variances, in `[0, 1)`.
    pub heterogeneity: f64,
    pub calibration_samples: usize,
    pub sigma_hat_source: SigmaHatSource,
    pub decode: DecodeScaling,
    pub prior: PriorSpec,
    pub solver: SolverOptions,
    pub sweep: Option<SweepSpec>,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 1000,
            scheme: Scheme::Fdm,
            estimator: EstimatorKind::Rwb,
            solvers: vec![
                SolverKind::FdmMse,
                SolverKind::FdmMd,
                SolverKind::Equal,
                SolverKind::ChannelInversion,
            ],
            num_devices: 3,
            feature_dim: 4,
            num_subcarriers: 4,
            num_classes: 5,
            noise_var: 0.1,
            channel_scale: 1.0,
            comm_snr_db: 10.0,
            sensing_snr_db: 20.0,
            sensing_vars: None,
            heterogeneity: 0.0,
            calibration_samples: 10_000,
            sigma_hat_source: SigmaHatSource::default(),
            decode: DecodeScaling::default(),
            prior: PriorSpec::default(),
            solver: SolverOptions::default(),
            sweep: None,
            output: PathBuf::from("out"),
        }
    }
}

fn is_count(v: f64) -> bool {
    v >= 1.0 && v.fract() == 0.0 && v <= 1e6
}

impl ExperimentConfig {
    /// Reads and validates a config. Relative prior paths are resolved
    /// against the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|m| Error::parse(path, m))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for p in [&mut cfg.prior.path, &mut cfg.prior.samples].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is plain data")
    }

    pub fn validate(&self) -> Result<()> {
        let v = |m: &str| Error::validation(m);
        if self.trials == 0 {
            return Err(v("trials must be at least 1"));
        }
        if self.num_devices == 0 || self.feature_dim == 0 || self.num_classes == 0 {
            return Err(v("K, M and L must be at least 1"));
        }
        if self.feature_dim > self.num_subcarriers {
            return Err(Error::validation(format!(
                "M = {} feature elements need at least as many slots/subcarriers, N = {}",
                self.feature_dim, self.num_subcarriers
            )));
        }
        if !(self.noise_var >= 0.0 && self.noise_var.is_finite()) {
            return Err(v("noise_var must be finite and nonnegative"));
        }
        if !(self.channel_scale > 0.0 && self.channel_scale.is_finite()) {
            return Err(v("channel_scale must be positive"));
        }
        if !self.comm_snr_db.is_finite() || !self.sensing_snr_db.is_finite() {
            return Err(v("SNR values must be finite"));
        }
        if !(0.0..1.0).contains(&self.heterogeneity) {
            return Err(v("heterogeneity must lie in [0, 1)"));
        }
        if let Some(vars) = &self.sensing_vars {
            if vars.len() != self.num_devices {
                return Err(Error::DimensionMismatch {
                    expected: self.num_devices,
                    got: vars.len(),
                });
            }
            if vars.iter().any(|&s| !(s >= 0.0 && s.is_finite())) {
                return Err(v("sensing_vars must be finite and nonnegative"));
            }
        }
        if self.calibration_samples < 2 * self.num_classes {
            return Err(v("calibration_samples must be at least twice the number of classes"));
        }
        if self.solvers.is_empty() {
            return Err(v("at least one solver is required"));
        }
        for s in &self.solvers {
            if let Some(scheme) = s.scheme() {
                if scheme != self.scheme {
                    return Err(Error::validation(format!("solver {s} does not apply to the {:?} scheme", self.scheme)));
                }
            }
        }
        if !(self.prior.min_md > 0.0 && self.prior.min_md.is_finite()) {
            return Err(v("prior.min_md must be positive"));
        }
        self.solver.validate()?;
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(v("sweep.values must not be empty"));
            }
            if sweep.values.iter().any(|x| !x.is_finite()) {
                return Err(v("sweep values must be finite"));
            }
            match sweep.variable {
                SweepVariable::Devices => {
                    if !sweep.values.iter().all(|&x| is_count(x)) {
                        return Err(v("device counts must be positive integers"));
                    }
                    if self.sensing_vars.is_some() {
                        return Err(v("a device sweep needs generated sensing variances, not sensing_vars"));
                    }
                }
                SweepVariable::Subcarriers => {
                    if !sweep.values.iter().all(|&x| is_count(x) && x >= self.feature_dim as f64) {
                        return Err(v("subcarrier counts must be integers no smaller than M"));
                    }
                }
                SweepVariable::SensingSnr if self.sensing_vars.is_some() => {
                    return Err(v("a sensing SNR sweep needs generated sensing variances, not sensing_vars"));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Loads, fits or synthesizes the prior.
    pub fn build_prior(&self) -> Result<GaussianMixturePrior> {
        let prior = if let Some(p) = &self.prior.path {
            GaussianMixturePrior::load(p)?
        } else if let Some(p) = &self.prior.samples {
            let samples = crate::gm_prior::read_samples_csv(p)?;
            GaussianMixturePrior::fit_from_samples(&samples, self.num_classes)?
        } else {
            GaussianMixturePrior::synthetic(self.num_classes, self.feature_dim, self.prior.min_md, self.prior.seed)?
        };
        if prior.num_classes() != self.num_classes || prior.feature_dim() != self.feature_dim {
            return Err(Error::validation(format!(
                "prior has L = {}, M = {} but the config says L = {}, M = {}",
                prior.num_classes(),
                prior.feature_dim(),
                self.num_classes,
                self.feature_dim
            )));
        }
        Ok(prior)
    }

    /// Transmit budget implied by the communication SNR.
    pub fn power_budget(&self, comm_snr_db: f64) -> f64 {
        self.noise_var * 10f64.powf(comm_snr_db / 10.0)
    }
}
