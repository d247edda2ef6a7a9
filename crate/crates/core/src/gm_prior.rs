//! Gaussian-mixture feature prior with a shared diagonal covariance.
//!
//! Classes are indexed from zero throughout the crate. The prior is immutable
//! once built; every constructor validates it.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rand::Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from;

/// Lower bound applied to fitted per-dimension variances.
pub const VARIANCE_FLOOR: f64 = 1e-9;

const MIXING_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixturePrior {
    means: Array2<f64>,
    variances: Vec<f64>,
    mixing: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFeature {
    pub label: usize,
    pub x: Vec<f64>,
}

/// Per-dimension minimum squared gap between class means.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminativePrior {
    pub delta: Vec<f64>,
    /// Pair attaining the minimum of the summed Mahalanobis distance.
    pub min_pair: (usize, usize),
}

/// On-disk form of the prior.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct PriorDocument {
    #[serde(rename = "L")]
    num_classes: usize,
    #[serde(rename = "M")]
    feature_dim: usize,
    means: Vec<Vec<f64>>,
    variances: Vec<f64>,
    mixing: Vec<f64>,
}

fn check_finite(x: &[f64], what: &str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::validation(format!("{what} contains a non-finite entry")))
    }
}

impl GaussianMixturePrior {
    pub fn new(means: Array2<f64>, variances: Vec<f64>, mixing: Vec<f64>) -> Result<Self> {
        let (l, m) = means.dim();
        if l == 0 || m == 0 {
            return Err(Error::validation("prior needs at least one class and one dimension"));
        }
        if variances.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: variances.len(),
            });
        }
        if mixing.len() != l {
            return Err(Error::DimensionMismatch {
                expected: l,
                got: mixing.len(),
            });
        }
        if means.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("class means contain a non-finite entry"));
        }
        if variances.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::validation("variances must be finite and strictly positive"));
        }
        if mixing.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return Err(Error::validation("mixing coefficients must be nonnegative"));
        }
        let total: f64 = mixing.iter().sum();
        if (total - 1.0).abs() > MIXING_TOL {
            return Err(Error::validation(format!(
                "mixing coefficients sum to {total}, expected 1"
            )));
        }
        Ok(Self {
            means,
            variances,
            mixing,
        })
    }

    /// Uniform-mixing prior with unit variances whose class means are drawn
    /// from a standard Gaussian and rescaled so the minimum pairwise
    /// Mahalanobis distance equals `min_md`.
    pub fn synthetic(num_classes: usize, feature_dim: usize, min_md: f64, seed: u64) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::validation("synthetic prior needs at least two classes"));
        }
        if !(min_md > 0.0) {
            return Err(Error::validation("target minimum distance must be positive"));
        }
        let mut rng = rng_from(seed);
        let raw = Array2::from_shape_fn((num_classes, feature_dim), |_| {
            rng.sample::<f64, _>(StandardNormal)
        });
        let unit = Self::new(
            raw.clone(),
            vec![1.0; feature_dim],
            vec![1.0 / num_classes as f64; num_classes],
        )?;
        let (g, _) = unit.min_md()?;
        if g <= 0.0 {
            return Err(Error::validation("degenerate draw of class means"));
        }
        let scale = (min_md / g).sqrt();
        Self::new(raw * scale, unit.variances, unit.mixing)
    }

    pub fn num_classes(&self) -> usize {
        self.means.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.means.ncols()
    }

    pub fn means(&self) -> &Array2<f64> {
        &self.means
    }

    pub fn mean(&self, class: usize) -> ArrayView1<'_, f64> {
        self.means.row(class)
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn mixing(&self) -> &[f64] {
        &self.mixing
    }

    pub fn mean_variance(&self) -> f64 {
        self.variances.iter().sum::<f64>() / self.variances.len() as f64
    }

    pub(crate) fn check_class(&self, class: usize) -> Result<()> {
        if class < self.num_classes() {
            Ok(())
        } else {
            Err(Error::ClassOutOfRange {
                index: class,
                num_classes: self.num_classes(),
            })
        }
    }

    fn check_vector(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.feature_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim(),
                got: x.len(),
            });
        }
        check_finite(x, "feature vector")
    }

    /// Draws `count` labelled features. Deterministic in `seed`.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<LabeledFeature> {
        let mut rng = rng_from(seed);
        self.sample_with(&mut rng, count)
    }

    pub(crate) fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<LabeledFeature> {
        if count == 0 {
            return Vec::new();
        }
        let classes = WeightedIndex::new(&self.mixing).expect("validated mixing vector");
        let sd: Vec<f64> = self.variances.iter().map(|v| v.sqrt()).collect();
        (0..count)
            .map(|_| {
                let label = classes.sample(rng);
                let mu = self.means.row(label);
                let x = mu
                    .iter()
                    .zip(&sd)
                    .map(|(m, s)| m + s * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                LabeledFeature { label, x }
            })
            .collect()
    }

    /// `log pi_l + log N(x | mu_l, diag(sigma_m^2 + extra_var))` for every class.
    pub(crate) fn log_joint(&self, x: &[f64], extra_var: f64) -> Vec<f64> {
        let var: Vec<f64> = self.variances.iter().map(|v| v + extra_var).collect();
        let log_norm: f64 = var.iter().map(|v| (2.0 * PI * v).ln()).sum::<f64>() * 0.5;
        self.means
            .rows()
            .into_iter()
            .zip(&self.mixing)
            .map(|(mu, &pi)| {
                let quad: f64 = x
                    .iter()
                    .zip(mu.iter())
                    .zip(&var)
                    .map(|((xi, mi), v)| (xi - mi) * (xi - mi) / v)
                    .sum();
                pi.ln() - 0.5 * quad - log_norm
            })
            .collect()
    }

    /// Posterior class probabilities of an observation corrupted by
    /// independent Gaussian noise of variance `sensing_var` per element.
    pub fn responsibilities(&self, observation: &[f64], sensing_var: f64) -> Result<Vec<f64>> {
        self.check_vector(observation)?;
        if !(sensing_var >= 0.0) || !sensing_var.is_finite() {
            return Err(Error::validation("sensing variance must be finite and nonnegative"));
        }
        Ok(softmax(&self.log_joint(observation, sensing_var)))
    }

    /// Mahalanobis distance between two class-conditional densities,
    /// `sum_m (mu_l,m - mu_l',m)^2 / sigma_m^2`.
    pub fn pairwise_md(&self, l: usize, l2: usize) -> Result<f64> {
        self.check_class(l)?;
        self.check_class(l2)?;
        Ok(self
            .means
            .row(l)
            .iter()
            .zip(self.means.row(l2).iter())
            .zip(&self.variances)
            .map(|((a, b), v)| (a - b) * (a - b) / v)
            .sum())
    }

    /// Minimum pairwise distance and the lexicographically first pair
    /// attaining it.
    pub fn min_md(&self) -> Result<(f64, (usize, usize))> {
        let l = self.num_classes();
        if l < 2 {
            return Err(Error::validation("minimum distance needs at least two classes"));
        }
        let mut best = (f64::INFINITY, (0, 1));
        for a in 0..l {
            for b in a + 1..l {
                let g = self.pairwise_md(a, b)?;
                if g < best.0 {
                    best = (g, (a, b));
                }
            }
        }
        Ok(best)
    }

    pub fn discriminative_prior(&self) -> Result<DiscriminativePrior> {
        let (_, min_pair) = self.min_md()?;
        let l = self.num_classes();
        let delta = (0..self.feature_dim())
            .map(|m| {
                let col = self.means.column(m);
                let mut best = f64::INFINITY;
                for a in 0..l {
                    for b in a + 1..l {
                        let d = col[a] - col[b];
                        best = best.min(d * d);
                    }
                }
                best
            })
            .collect();
        Ok(DiscriminativePrior { delta, min_pair })
    }

    /// MAP class for a clean feature vector; ties go to the smallest index.
    pub fn map_classify(&self, x: &[f64]) -> Result<usize> {
        self.check_vector(x)?;
        Ok(argmax(&self.log_joint(x, 0.0)))
    }

    /// Moment fit from labelled samples: per-class means, pooled
    /// within-class variance per dimension (floored at [`VARIANCE_FLOOR`])
    /// and empirical class frequencies.
    pub fn fit_from_samples(samples: &[LabeledFeature], num_classes: usize) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::validation("need at least one class"));
        }
        let dim = samples
            .first()
            .map(|s| s.x.len())
            .ok_or_else(|| Error::validation("no samples to fit"))?;
        let mut counts = vec![0usize; num_classes];
        let mut sums = Array2::<f64>::zeros((num_classes, dim));
        for s in samples {
            if s.label >= num_classes {
                return Err(Error::ClassOutOfRange {
                    index: s.label,
                    num_classes,
                });
            }
            if s.x.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: s.x.len(),
                });
            }
            check_finite(&s.x, "sample")?;
            counts[s.label] += 1;
            for (acc, v) in sums.row_mut(s.label).iter_mut().zip(&s.x) {
                *acc += v;
            }
        }
        let missing: Vec<usize> = (0..num_classes).filter(|&c| counts[c] == 0).collect();
        if !missing.is_empty() {
            return Err(Error::MissingClasses { missing });
        }
        if let Some(c) = (0..num_classes).find(|&c| counts[c] < 2) {
            return Err(Error::validation(format!(
                "class {c} has fewer than two samples"
            )));
        }
        let mut means = sums;
        for (mut row, &n) in means.rows_mut().into_iter().zip(&counts) {
            row /= n as f64;
        }
        let mut ss = vec![0.0; dim];
        for s in samples {
            for ((acc, v), mu) in ss.iter_mut().zip(&s.x).zip(means.row(s.label).iter()) {
                *acc += (v - mu) * (v - mu);
            }
        }
        let dof = (samples.len() - num_classes) as f64;
        let variances = ss.iter().map(|v| (v / dof).max(VARIANCE_FLOOR)).collect();
        let n = samples.len() as f64;
        let mixing: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
        Self::new(means, variances, normalize_mixing(mixing))
    }

    pub fn to_toml(&self) -> String {
        let doc = PriorDocument {
            num_classes: self.num_classes(),
            feature_dim: self.feature_dim(),
            means: self.means.rows().into_iter().map(|r| r.to_vec()).collect(),
            variances: self.variances.clone(),
            mixing: self.mixing.clone(),
        };
        toml::to_string(&doc).expect("prior document serializes")
    }

    pub fn from_toml(text: &str) -> std::result::Result<Self, String> {
        let doc: PriorDocument = toml::from_str(text).map_err(|e| e.to_string())?;
        if doc.means.len() != doc.num_classes {
            return Err(format!("expected {} mean rows, found {}", doc.num_classes, doc.means.len()));
        }
        let mut flat = Vec::with_capacity(doc.num_classes * doc.feature_dim);
        for (i, row) in doc.means.iter().enumerate() {
            if row.len() != doc.feature_dim {
                return Err(format!("mean row {i} has {} entries, expected {}", row.len(), doc.feature_dim));
            }
            flat.extend_from_slice(row);
        }
        let means = Array2::from_shape_vec((doc.num_classes, doc.feature_dim), flat)
            .map_err(|e| e.to_string())?;
        Self::new(means, doc.variances, doc.mixing).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|m| Error::parse(path, m))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }
}

/// Rounding can leave frequency vectors a few ulps away from unit sum.
fn normalize_mixing(mut p: Vec<f64>) -> Vec<f64> {
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    p
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= total);
    out
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Writes samples as CSV rows `label, x_1..x_M` with a header.
pub fn write_samples_csv(samples: &[LabeledFeature], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e))?;
    let dim = samples.first().map_or(0, |s| s.x.len());
    let mut header = vec!["label".to_string()];
    header.extend((1..=dim).map(|m| format!("x_{m}")));
    w.write_record(&header).map_err(|e| Error::parse(path, e))?;
    for s in samples {
        let mut row = vec![s.label.to_string()];
        row.extend(s.x.iter().map(|v| format!("{v:.17e}")));
        w.write_record(&row).map_err(|e| Error::parse(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_samples_csv(path: &Path) -> Result<Vec<LabeledFeature>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::parse(path, e))?;
        let mut fields = rec.iter();
        let label = fields
            .next()
            .ok_or_else(|| Error::parse(path, "empty row"))?
            .trim()
            .parse::<usize>()
            .map_err(|e| Error::parse(path, e))?;
        let x = fields
            .map(|f| f.trim().parse::<f64>().map_err(|e| Error::parse(path, e)))
            .collect::<Result<Vec<_>>>()?;
        out.push(LabeledFeature { label, x });
    }
    Ok(out)
}
