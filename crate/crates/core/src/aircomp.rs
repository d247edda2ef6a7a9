//! Over-the-air aggregation of device estimates.
//!
//! All quantities are magnitudes: phases are assumed pre-compensated from
//! reciprocal channel knowledge, so `|h|`, `|b|` and `|a|` are what matter.
//! Feature element `m` travels on slot/subcarrier `m`; a channel with more
//! columns than features leaves the extra columns idle.
//!
//! The aggregation error follows the unit-gain convention: the receiver
//! targets `sum_k x_hat_k` and the classifier divides the decoded vector by
//! `K` afterwards.

use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gm_prior::DiscriminativePrior;
use crate::rng::{rng_from, SimRng};
use crate::sensing::{DeviceProfile, EstimatedFeature};

/// Relative slack allowed on power budgets.
pub const POWER_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// One quasi-static channel reused over consecutive slots; the budget
    /// applies to each slot.
    Tdm,
    /// Frequency-selective subcarriers sharing one budget per device.
    Fdm,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tdm" => Ok(Scheme::Tdm),
            "fdm" => Ok(Scheme::Fdm),
            other => Err(Error::validation(format!("unknown scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// `|h_{k,n}|`, devices by rows.
    pub gains: Array2<f64>,
    pub noise_var: f64,
    pub scheme: Scheme,
}

impl ChannelRealization {
    pub fn new(gains: Array2<f64>, noise_var: f64, scheme: Scheme) -> Result<Self> {
        if gains.nrows() == 0 || gains.ncols() == 0 {
            return Err(Error::validation("channel needs at least one device and one column"));
        }
        if gains.iter().any(|&g| !(g >= 0.0 && g.is_finite())) {
            return Err(Error::validation("channel gains must be finite and nonnegative"));
        }
        if !(noise_var >= 0.0 && noise_var.is_finite()) {
            return Err(Error::validation("noise variance must be finite and nonnegative"));
        }
        if scheme == Scheme::Tdm {
            for row in gains.rows() {
                if row.iter().any(|&g| (g - row[0]).abs() > 1e-12) {
                    return Err(Error::validation("TDM gains must be identical across slots"));
                }
            }
        }
        Ok(Self {
            gains,
            noise_var,
            scheme,
        })
    }

    pub fn num_devices(&self) -> usize {
        self.gains.nrows()
    }

    pub fn num_columns(&self) -> usize {
        self.gains.ncols()
    }

    /// Writes `k,n,gain` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e))?;
        w.write_record(["k", "n", "gain"]).map_err(|e| Error::parse(path, e))?;
        for ((k, n), g) in self.gains.indexed_iter() {
            w.write_record([k.to_string(), n.to_string(), format!("{g:.17e}")])
                .map_err(|e| Error::parse(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransceiverDesign {
    /// `|b_{k,n}|`.
    pub tx: Array2<f64>,
    /// `|a_n|`.
    pub rx: Vec<f64>,
    pub scheme: Scheme,
}

impl TransceiverDesign {
    /// Transmit energy per device: summed over subcarriers for FDM, the
    /// largest slot for TDM.
    pub fn power_usage(&self, moments: &Array2<f64>) -> Vec<f64> {
        self.tx
            .rows()
            .into_iter()
            .zip(moments.rows())
            .map(|(b, nu2)| {
                let per_col = b.iter().zip(nu2.iter()).map(|(b, v)| b * b * v);
                match self.scheme {
                    Scheme::Fdm => per_col.sum(),
                    Scheme::Tdm => per_col.fold(0.0, f64::max),
                }
            })
            .collect()
    }

    pub fn check_power(&self, budgets: &[f64], moments: &Array2<f64>) -> Result<()> {
        if moments.dim() != self.tx.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.tx.len(),
                got: moments.len(),
            });
        }
        for (device, (used, &budget)) in self.power_usage(moments).into_iter().zip(budgets).enumerate() {
            if !(used <= budget * (1.0 + POWER_SLACK)) {
                return Err(Error::PowerViolation { device, used, budget });
            }
        }
        Ok(())
    }

    /// Writes `k,n,b` rows followed by `rx,n,a` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e))?;
        w.write_record(["k", "n", "value"]).map_err(|e| Error::parse(path, e))?;
        for ((k, n), b) in self.tx.indexed_iter() {
            w.write_record([k.to_string(), n.to_string(), format!("{b:.17e}")])
                .map_err(|e| Error::parse(path, e))?;
        }
        for (n, a) in self.rx.iter().enumerate() {
            w.write_record(["rx".to_string(), n.to_string(), format!("{a:.17e}")])
                .map_err(|e| Error::parse(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Inputs of the accuracy lower bound: noise-free accuracy and the
/// classification margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxyBound {
    pub a0: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedFeature {
    /// Decoded vector `a_n (sum_k h b x_hat + w)`, unit-gain scale.
    pub y_hat: Vec<f64>,
    /// Noise-free average `(1/K) sum_k x_hat_k`.
    pub y_ideal: Vec<f64>,
}

impl AggregatedFeature {
    /// Decoded vector rescaled to the average, as fed to the classifier.
    pub fn decoded_average(&self, num_devices: usize) -> Vec<f64> {
        self.y_hat.iter().map(|v| v / num_devices as f64).collect()
    }
}

pub fn ideal_average(estimates: &[EstimatedFeature]) -> Result<Vec<f64>> {
    let first = estimates
        .first()
        .ok_or_else(|| Error::validation("need at least one estimate"))?;
    let dim = first.x_hat.len();
    let mut acc = vec![0.0; dim];
    for e in estimates {
        if e.x_hat.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: e.x_hat.len(),
            });
        }
        acc.iter_mut().zip(&e.x_hat).for_each(|(a, x)| *a += x);
    }
    let k = estimates.len() as f64;
    acc.iter_mut().for_each(|a| *a /= k);
    Ok(acc)
}

fn moments_matrix(profiles: &[DeviceProfile], cols: usize) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((profiles.len(), cols));
    for (k, p) in profiles.iter().enumerate() {
        if p.feature_second_moments.len() < cols {
            return Err(Error::DimensionMismatch {
                expected: cols,
                got: p.feature_second_moments.len(),
            });
        }
        for n in 0..cols {
            out[[k, n]] = p.feature_second_moments[n];
        }
    }
    Ok(out)
}

fn check_shapes(channel: &ChannelRealization, design: &TransceiverDesign, dim: usize) -> Result<()> {
    if design.tx.dim() != channel.gains.dim() {
        return Err(Error::DimensionMismatch {
            expected: channel.gains.len(),
            got: design.tx.len(),
        });
    }
    if design.rx.len() != channel.num_columns() {
        return Err(Error::DimensionMismatch {
            expected: channel.num_columns(),
            got: design.rx.len(),
        });
    }
    if dim > channel.num_columns() {
        return Err(Error::validation(format!(
            "{dim} feature elements do not fit on {} columns",
            channel.num_columns()
        )));
    }
    Ok(())
}

/// Sends every device's estimate through the channel and applies the receive
/// coefficients. Fails if the design exceeds any device's budget.
pub fn transmit_aggregate(
    estimates: &[EstimatedFeature],
    channel: &ChannelRealization,
    design: &TransceiverDesign,
    profiles: &[DeviceProfile],
    seed: u64,
) -> Result<AggregatedFeature> {
    if profiles.len() != channel.num_devices() {
        return Err(Error::DimensionMismatch {
            expected: channel.num_devices(),
            got: profiles.len(),
        });
    }
    let budgets: Vec<f64> = profiles.iter().map(|p| p.power_budget).collect();
    let moments = moments_matrix(profiles, channel.num_columns())?;
    design.check_power(&budgets, &moments)?;
    let mut rng = rng_from(seed);
    aggregate_with(&mut rng, estimates, channel, design)
}

/// Aggregation without the budget check, for callers that validated the
/// design once up front.
pub fn aggregate_with(
    rng: &mut SimRng,
    estimates: &[EstimatedFeature],
    channel: &ChannelRealization,
    design: &TransceiverDesign,
) -> Result<AggregatedFeature> {
    if estimates.len() != channel.num_devices() {
        return Err(Error::DimensionMismatch {
            expected: channel.num_devices(),
            got: estimates.len(),
        });
    }
    let y_ideal = ideal_average(estimates)?;
    let dim = y_ideal.len();
    check_shapes(channel, design, dim)?;
    let sd = channel.noise_var.sqrt();
    let y_hat = (0..dim)
        .map(|n| {
            let superposed: f64 = estimates
                .iter()
                .enumerate()
                .map(|(k, e)| channel.gains[[k, n]] * design.tx[[k, n]] * e.x_hat[n])
                .sum();
            let noise = sd * rng.sample::<f64, _>(StandardNormal);
            design.rx[n] * (superposed + noise)
        })
        .collect();
    Ok(AggregatedFeature { y_hat, y_ideal })
}

/// Per-column aggregation MSE,
/// `sum_k (a_n h_kn b_kn - 1)^2 sigma_hat_kn^2 + a_n^2 sigma_w^2`.
/// Only the columns present in `sigma_hat` are evaluated.
pub fn analytic_mse(channel: &ChannelRealization, design: &TransceiverDesign, sigma_hat: &Array2<f64>) -> Vec<f64> {
    (0..sigma_hat.ncols())
        .map(|n| {
            let a = design.rx[n];
            let misalign: f64 = (0..channel.num_devices())
                .map(|k| {
                    let e = a * channel.gains[[k, n]] * design.tx[[k, n]] - 1.0;
                    e * e * sigma_hat[[k, n]]
                })
                .sum();
            misalign + a * a * channel.noise_var
        })
        .collect()
}

/// Minimum inter-class Mahalanobis distance of each received element,
/// `(sum_k h b)^2 Delta_n / (sum_k (h b)^2 sigma_hat^2 + sigma_w^2)`.
/// Independent of the receive coefficients.
pub fn received_md(
    channel: &ChannelRealization,
    design: &TransceiverDesign,
    sigma_hat: &Array2<f64>,
    delta: &DiscriminativePrior,
) -> Vec<f64> {
    (0..sigma_hat.ncols())
        .map(|n| {
            let mut s = 0.0;
            let mut d = channel.noise_var;
            for k in 0..channel.num_devices() {
                let c = channel.gains[[k, n]] * design.tx[[k, n]];
                s += c;
                d += c * c * sigma_hat[[k, n]];
            }
            if s == 0.0 {
                0.0
            } else {
                s * s * delta.delta[n] / d
            }
        })
        .collect()
}

/// Markov lower bound on accuracy, clamped at zero.
pub fn markov_bound(bound: ProxyBound, total_mse: f64) -> f64 {
    bound.a0 * (1.0 - total_mse / (bound.margin * bound.margin)).max(0.0)
}

/// I.i.d. Rayleigh magnitudes with `E|h|^2 = scale`. TDM reuses one draw per
/// device across all slots.
pub fn sample_channel(
    num_devices: usize,
    num_columns: usize,
    scheme: Scheme,
    scale: f64,
    noise_var: f64,
    seed: u64,
) -> Result<ChannelRealization> {
    let mut rng = rng_from(seed);
    sample_channel_with(&mut rng, num_devices, num_columns, scheme, scale, noise_var)
}

pub fn sample_channel_with(
    rng: &mut SimRng,
    num_devices: usize,
    num_columns: usize,
    scheme: Scheme,
    scale: f64,
    noise_var: f64,
) -> Result<ChannelRealization> {
    if num_devices == 0 || num_columns == 0 {
        return Err(Error::validation("channel needs at least one device and one column"));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::validation("channel scale must be positive"));
    }
    let sd = (scale / 2.0).sqrt();
    let mut draw = || {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        sd * re.hypot(im)
    };
    let gains = match scheme {
        Scheme::Fdm => Array2::from_shape_fn((num_devices, num_columns), |_| draw()),
        Scheme::Tdm => {
            let per_device: Vec<f64> = (0..num_devices).map(|_| draw()).collect();
            Array2::from_shape_fn((num_devices, num_columns), |(k, _)| per_device[k])
        }
    };
    ChannelRealization::new(gains, noise_var, scheme)
}

/// Communication SNR in dB, `10 log10(P_k / sigma_w^2)`.
pub fn comm_snr(profile: &DeviceProfile, channel: &ChannelRealization) -> f64 {
    10.0 * (profile.power_budget / channel.noise_var).log10()
}
