//! Sensing observation model and the local feature estimators.
//!
//! Each device sees `x_tilde = x + d` with `d ~ N(0, sigma_k^2 I)` and
//! produces an estimate of `x` with one of three rules:
//!
//! * ML: the observation itself.
//! * MMSE: per-element Gaussian shrinkage toward the true class mean. Needs
//!   the label, so it is only usable as a lower-bound reference.
//! * RWB: responsibility-weighted mixture of the per-class shrinkage
//!   estimates, computable from the prior alone.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gm_prior::{GaussianMixturePrior, LabeledFeature};
use crate::rng::{rng_from, SimRng};

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceProfile {
    /// Sensing noise variance per feature element.
    pub sensing_var: f64,
    /// Transmit power budget.
    pub power_budget: f64,
    /// Second moment of each transmitted feature element.
    pub feature_second_moments: Vec<f64>,
}

impl DeviceProfile {
    pub fn new(sensing_var: f64, power_budget: f64, feature_second_moments: Vec<f64>) -> Result<Self> {
        let p = Self {
            sensing_var,
            power_budget,
            feature_second_moments,
        };
        p.validate()?;
        Ok(p)
    }

    /// A zero sensing variance is accepted and means a noiseless sensor.
    pub fn validate(&self) -> Result<()> {
        if !(self.sensing_var >= 0.0 && self.sensing_var.is_finite()) {
            return Err(Error::validation("sensing variance must be finite and nonnegative"));
        }
        if !(self.power_budget > 0.0 && self.power_budget.is_finite()) {
            return Err(Error::validation("power budget must be finite and positive"));
        }
        if self
            .feature_second_moments
            .iter()
            .any(|&v| !(v > 0.0 && v.is_finite()))
        {
            return Err(Error::validation("feature second moments must be finite and positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisyObservation {
    pub device: usize,
    pub x_tilde: Vec<f64>,
    pub sensing_var: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Ml,
    Mmse,
    Rwb,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 3] = [EstimatorKind::Ml, EstimatorKind::Mmse, EstimatorKind::Rwb];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Ml => "ml",
            EstimatorKind::Mmse => "mmse",
            EstimatorKind::Rwb => "rwb",
        }
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ml" => Ok(EstimatorKind::Ml),
            "mmse" => Ok(EstimatorKind::Mmse),
            "rwb" => Ok(EstimatorKind::Rwb),
            other => Err(Error::validation(format!("unknown estimator '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatedFeature {
    pub device: usize,
    pub x_hat: Vec<f64>,
    pub kind: EstimatorKind,
    /// Per-element posterior variance under the estimator's Gaussian model.
    pub posterior_var: Vec<f64>,
}

/// Draws the noisy observation of `x` seen by one device.
pub fn observe(x: &LabeledFeature, device: usize, profile: &DeviceProfile, seed: u64) -> Result<NoisyObservation> {
    profile.validate()?;
    let mut rng = rng_from(seed);
    Ok(observe_with(&mut rng, &x.x, device, profile.sensing_var))
}

pub(crate) fn observe_with(rng: &mut SimRng, x: &[f64], device: usize, sensing_var: f64) -> NoisyObservation {
    let sd = sensing_var.sqrt();
    let x_tilde = x
        .iter()
        .map(|v| v + sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    NoisyObservation {
        device,
        x_tilde,
        sensing_var,
    }
}

pub fn ml_estimate(obs: &NoisyObservation) -> EstimatedFeature {
    EstimatedFeature {
        device: obs.device,
        x_hat: obs.x_tilde.clone(),
        kind: EstimatorKind::Ml,
        posterior_var: vec![obs.sensing_var; obs.x_tilde.len()],
    }
}

fn check_obs(obs: &NoisyObservation, prior: &GaussianMixturePrior) -> Result<()> {
    if obs.x_tilde.len() != prior.feature_dim() {
        return Err(Error::DimensionMismatch {
            expected: prior.feature_dim(),
            got: obs.x_tilde.len(),
        });
    }
    if obs.x_tilde.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("observation contains a non-finite entry"));
    }
    Ok(())
}

/// Posterior mean of element `m` given class mean `mu`:
/// `(sigma_m^2 x_tilde + sigma_k^2 mu) / (sigma_m^2 + sigma_k^2)`.
#[inline]
fn shrink(x_tilde: f64, mu: f64, prior_var: f64, sensing_var: f64) -> f64 {
    (prior_var * x_tilde + sensing_var * mu) / (prior_var + sensing_var)
}

#[inline]
fn within_class_var(prior_var: f64, sensing_var: f64) -> f64 {
    prior_var * sensing_var / (prior_var + sensing_var)
}

/// Exact MMSE estimate given the true class.
pub fn mmse_estimate(obs: &NoisyObservation, prior: &GaussianMixturePrior, true_label: usize) -> Result<EstimatedFeature> {
    prior.check_class(true_label)?;
    check_obs(obs, prior)?;
    let mu = prior.mean(true_label);
    let s2 = obs.sensing_var;
    let x_hat = obs
        .x_tilde
        .iter()
        .zip(mu.iter())
        .zip(prior.variances())
        .map(|((&xt, &m), &v)| shrink(xt, m, v, s2))
        .collect();
    let posterior_var = prior.variances().iter().map(|&v| within_class_var(v, s2)).collect();
    Ok(EstimatedFeature {
        device: obs.device,
        x_hat,
        kind: EstimatorKind::Mmse,
        posterior_var,
    })
}

/// RWB estimate using the device's own noise variance for the responsibilities.
pub fn rwb_estimate(obs: &NoisyObservation, prior: &GaussianMixturePrior) -> Result<EstimatedFeature> {
    rwb_estimate_with(obs, prior, obs.sensing_var)
}

/// RWB estimate with a separately tuned noise variance inside the
/// responsibilities. The shrinkage itself always uses the observation's
/// sensing variance.
pub fn rwb_estimate_with(
    obs: &NoisyObservation,
    prior: &GaussianMixturePrior,
    responsibility_noise_var: f64,
) -> Result<EstimatedFeature> {
    check_obs(obs, prior)?;
    let theta = prior.responsibilities(&obs.x_tilde, responsibility_noise_var)?;
    let s2 = obs.sensing_var;
    let mut x_hat = Vec::with_capacity(obs.x_tilde.len());
    let mut posterior_var = Vec::with_capacity(obs.x_tilde.len());
    for (m, (&xt, &v)) in obs.x_tilde.iter().zip(prior.variances()).enumerate() {
        let col = prior.means().column(m);
        let blended: f64 = theta.iter().zip(col.iter()).map(|(t, &mu)| t * shrink(xt, mu, v, s2)).sum();
        let spread: f64 = theta
            .iter()
            .zip(col.iter())
            .map(|(t, &mu)| {
                let d = shrink(xt, mu, v, s2) - blended;
                t * d * d
            })
            .sum();
        x_hat.push(blended);
        posterior_var.push(within_class_var(v, s2) + spread);
    }
    Ok(EstimatedFeature {
        device: obs.device,
        x_hat,
        kind: EstimatorKind::Rwb,
        posterior_var,
    })
}

/// Dispatches on the estimator kind. `true_label` is only read by MMSE.
pub fn estimate(
    kind: EstimatorKind,
    obs: &NoisyObservation,
    prior: &GaussianMixturePrior,
    true_label: usize,
) -> Result<EstimatedFeature> {
    match kind {
        EstimatorKind::Ml => Ok(ml_estimate(obs)),
        EstimatorKind::Mmse => mmse_estimate(obs, prior, true_label),
        EstimatorKind::Rwb => rwb_estimate(obs, prior),
    }
}

/// Closed-form per-element MSE of an estimator. RWB's value depends on the
/// observation through its responsibilities, which must be supplied.
pub fn analytic_mse(
    kind: EstimatorKind,
    prior: &GaussianMixturePrior,
    sensing_var: f64,
    responsibilities: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let vars = prior.variances();
    match kind {
        EstimatorKind::Ml => Ok(vec![sensing_var; vars.len()]),
        EstimatorKind::Mmse => Ok(vars.iter().map(|&v| within_class_var(v, sensing_var)).collect()),
        EstimatorKind::Rwb => {
            let theta = responsibilities
                .ok_or_else(|| Error::validation("RWB analytic MSE needs the observation's responsibilities"))?;
            if theta.len() != prior.num_classes() {
                return Err(Error::DimensionMismatch {
                    expected: prior.num_classes(),
                    got: theta.len(),
                });
            }
            // The spread of the per-class posterior means does not depend on
            // the observation: bar_mu_l - ddot_mu = s2/(v+s2) (mu_l - sum theta mu).
            Ok(vars
                .iter()
                .enumerate()
                .map(|(m, &v)| {
                    let col = prior.means().column(m);
                    let centre: f64 = theta.iter().zip(col.iter()).map(|(t, mu)| t * mu).sum();
                    let gain = sensing_var / (v + sensing_var);
                    let spread: f64 = theta
                        .iter()
                        .zip(col.iter())
                        .map(|(t, mu)| t * (gain * (mu - centre)).powi(2))
                        .sum();
                    within_class_var(v, sensing_var) + spread
                })
                .collect())
        }
    }
}

/// Average sensing SNR in dB: `10 log10( mean_k (tr(Sigma)/M) / sigma_k^2 )`.
pub fn sensing_snr(prior: &GaussianMixturePrior, profiles: &[DeviceProfile]) -> Result<f64> {
    if profiles.is_empty() {
        return Err(Error::validation("sensing SNR needs at least one device"));
    }
    let avg_var = prior.mean_variance();
    let ratio = profiles.iter().map(|p| avg_var / p.sensing_var).sum::<f64>() / profiles.len() as f64;
    Ok(10.0 * ratio.log10())
}

/// Draws heterogeneous sensing variances whose average sensing SNR equals
/// `snr_db` exactly. Relative spreads are uniform on `[1 - h, 1 + h]`;
/// `heterogeneity = 0` gives identical devices.
pub fn sensing_vars_for_snr(
    prior: &GaussianMixturePrior,
    num_devices: usize,
    snr_db: f64,
    heterogeneity: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if num_devices == 0 {
        return Err(Error::validation("need at least one device"));
    }
    if !(0.0..1.0).contains(&heterogeneity) {
        return Err(Error::validation("heterogeneity must lie in [0, 1)"));
    }
    let mut rng = rng_from(seed);
    let weights: Vec<f64> = (0..num_devices)
        .map(|_| 1.0 + heterogeneity * (2.0 * rng.random::<f64>() - 1.0))
        .collect();
    let inv_mean = weights.iter().map(|w| 1.0 / w).sum::<f64>() / num_devices as f64;
    let scale = prior.mean_variance() * inv_mean / 10f64.powf(snr_db / 10.0);
    Ok(weights.iter().map(|w| scale * w).collect())
}
