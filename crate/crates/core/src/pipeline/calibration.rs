//! Offline statistics of each device's estimates, used as solver inputs.

use crate::error::Result;
use crate::gm_prior::{GaussianMixturePrior, VARIANCE_FLOOR};
use crate::rng::{rng_from, SimRng};
use crate::sensing::{estimate, observe_with, EstimatorKind};
use crate::stats::KahanSum;

use super::config::SigmaHatSource;

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    /// `E[x_hat_m^2]` per element.
    pub moments: Vec<f64>,
    /// Pooled within-class variance of `x_hat_m`.
    pub within_class: Vec<f64>,
    /// Average posterior variance reported by the estimator.
    pub posterior_var: Vec<f64>,
}

impl Calibration {
    pub fn sigma_hat(&self, source: SigmaHatSource) -> &[f64] {
        match source {
            SigmaHatSource::WithinClass => &self.within_class,
            SigmaHatSource::PosteriorVar => &self.posterior_var,
        }
    }
}

/// Runs `samples` draws through the observation model and estimator of one
/// device with sensing variance `sensing_var`.
pub fn calibrate(
    prior: &GaussianMixturePrior,
    kind: EstimatorKind,
    sensing_var: f64,
    samples: usize,
    seed: u64,
) -> Result<Calibration> {
    let mut rng: SimRng = rng_from(seed);
    let m = prior.feature_dim();
    let l = prior.num_classes();
    let draws = prior.sample_with(&mut rng, samples);
    let mut estimates = Vec::with_capacity(samples);
    for d in &draws {
        let obs = observe_with(&mut rng, &d.x, 0, sensing_var);
        estimates.push(estimate(kind, &obs, prior, d.label)?);
    }

    let mut second = vec![KahanSum::default(); m];
    let mut post = vec![KahanSum::default(); m];
    let mut class_sum = vec![vec![KahanSum::default(); m]; l];
    let mut class_count = vec![0usize; l];
    for (d, e) in draws.iter().zip(&estimates) {
        class_count[d.label] += 1;
        for j in 0..m {
            second[j].add(e.x_hat[j] * e.x_hat[j]);
            post[j].add(e.posterior_var[j]);
            class_sum[d.label][j].add(e.x_hat[j]);
        }
    }
    let n = samples as f64;
    let present = class_count.iter().filter(|&&c| c > 0).count();
    let dof = (samples - present).max(1) as f64;
    let mut within = vec![KahanSum::default(); m];
    for (d, e) in draws.iter().zip(&estimates) {
        for j in 0..m {
            let mean = class_sum[d.label][j].value() / class_count[d.label] as f64;
            let r = e.x_hat[j] - mean;
            within[j].add(r * r);
        }
    }
    Ok(Calibration {
        moments: second.iter().map(|s| (s.value() / n).max(VARIANCE_FLOOR)).collect(),
        within_class: within.iter().map(|s| (s.value() / dof).max(VARIANCE_FLOOR)).collect(),
        posterior_var: post.iter().map(|s| (s.value() / n).max(VARIANCE_FLOOR)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn ml_statistics_match_the_model() {
        // two classes at +-1, unit variance, sensing variance 0.5
        let prior = GaussianMixturePrior::new(array![[-1.0], [1.0]], vec![1.0], vec![0.5, 0.5]).unwrap();
        let c = calibrate(&prior, EstimatorKind::Ml, 0.5, 200_000, 3).unwrap();
        assert!((c.moments[0] - 2.5).abs() < 0.03, "{:?}", c.moments);
        assert!((c.within_class[0] - 1.5).abs() < 0.02, "{:?}", c.within_class);
        assert_eq!(c.posterior_var[0], 0.5);
    }

    #[test]
    fn reproducible() {
        let prior = GaussianMixturePrior::synthetic(3, 2, 4.0, 1).unwrap();
        let a = calibrate(&prior, EstimatorKind::Rwb, 0.3, 500, 9).unwrap();
        assert_eq!(a, calibrate(&prior, EstimatorKind::Rwb, 0.3, 500, 9).unwrap());
    }
}
