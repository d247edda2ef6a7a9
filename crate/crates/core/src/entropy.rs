//! Conditional entropy of one feature element given its noise-free average
//! across devices, for banks of ML and MMSE estimators. Values are in nats.

use std::f64::consts::{E, PI};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyReport {
    pub h_ml: f64,
    pub h_mmse: f64,
    /// Per-device shrinkage `sigma^2 / (sigma^2 + sigma_k^2)`.
    pub shrinkage: Vec<f64>,
}

fn check(prior_var: f64, sensing_vars: &[f64]) -> Result<()> {
    if !(prior_var > 0.0 && prior_var.is_finite()) {
        return Err(Error::validation("prior variance must be finite and positive"));
    }
    if sensing_vars.is_empty() {
        return Err(Error::validation("need at least one device"));
    }
    if sensing_vars.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::validation("sensing variances must be finite and positive"));
    }
    Ok(())
}

fn gaussian_entropy(precision: f64) -> f64 {
    0.5 * (2.0 * PI * E / precision).ln()
}

/// `1/2 log(2 pi e [1/sigma^2 + K^2 / sum sigma_k^2]^-1)`.
pub fn cond_entropy_ml(prior_var: f64, sensing_vars: &[f64]) -> Result<f64> {
    check(prior_var, sensing_vars)?;
    let k = sensing_vars.len() as f64;
    let total: f64 = sensing_vars.iter().sum();
    Ok(gaussian_entropy(1.0 / prior_var + k * k / total))
}

pub fn shrinkage(prior_var: f64, sensing_vars: &[f64]) -> Vec<f64> {
    sensing_vars.iter().map(|s| prior_var / (prior_var + s)).collect()
}

/// `1/2 log(2 pi e [1/sigma^2 + (sum rho_k)^2 / sum rho_k^2 sigma_k^2]^-1)`.
pub fn cond_entropy_mmse(prior_var: f64, sensing_vars: &[f64]) -> Result<f64> {
    check(prior_var, sensing_vars)?;
    let rho = shrinkage(prior_var, sensing_vars);
    let num = rho.iter().sum::<f64>().powi(2);
    let den: f64 = rho.iter().zip(sensing_vars).map(|(r, s)| r * r * s).sum();
    Ok(gaussian_entropy(1.0 / prior_var + num / den))
}

/// Lower bound on the ML entropy with per-device precisions added directly;
/// tight when all sensing variances coincide.
pub fn cond_entropy_ml_bound(prior_var: f64, sensing_vars: &[f64]) -> Result<f64> {
    check(prior_var, sensing_vars)?;
    let precision: f64 = sensing_vars.iter().map(|s| 1.0 / s).sum();
    Ok(gaussian_entropy(1.0 / prior_var + precision))
}

pub fn entropy_report(prior_var: f64, sensing_vars: &[f64]) -> Result<EntropyReport> {
    Ok(EntropyReport {
        h_ml: cond_entropy_ml(prior_var, sensing_vars)?,
        h_mmse: cond_entropy_mmse(prior_var, sensing_vars)?,
        shrinkage: shrinkage(prior_var, sensing_vars),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_single_device() {
        // independent arithmetic: 0.5 * ln(2 pi e * 0.5)
        let expected = 0.5 * (PI * E).ln();
        let h = cond_entropy_ml(1.0, &[1.0]).unwrap();
        assert!((h - expected).abs() < 1e-15);
        assert!((h - 1.072_364_942_925_000_2).abs() < 1e-12);
    }

    #[test]
    fn equal_devices_make_the_bound_tight() {
        let v = [0.4; 5];
        let a = cond_entropy_ml(2.0, &v).unwrap();
        let b = cond_entropy_ml_bound(2.0, &v).unwrap();
        assert!((a - b).abs() < 1e-14);
        assert!((cond_entropy_mmse(2.0, &v).unwrap() - a).abs() < 1e-12);
    }

    #[test]
    fn scaling_shifts_entropy_by_half_log() {
        let v = [0.3, 1.1, 2.5];
        let c = 7.0;
        let scaled: Vec<f64> = v.iter().map(|s| s * c).collect();
        for f in [cond_entropy_ml, cond_entropy_mmse] {
            let d = f(1.5 * c, &scaled).unwrap() - f(1.5, &v).unwrap();
            assert!((d - 0.5 * c.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_prior_erases_the_difference() {
        let v = [0.1, 1.0, 10.0];
        let a = cond_entropy_ml(1e12, &v).unwrap();
        let b = cond_entropy_mmse(1e12, &v).unwrap();
        assert!((a - b).abs() < 1e-4);
    }

    #[test]
    fn heterogeneous_devices_favour_mmse() {
        let v = [0.1, 1.0, 10.0];
        let r = entropy_report(1.0, &v).unwrap();
        assert!(r.h_mmse < r.h_ml);
        assert!(r.shrinkage.iter().all(|&p| p > 0.0 && p <= 1.0));
    }

    #[test]
    fn rejects_empty_and_nonpositive() {
        assert!(cond_entropy_ml(1.0, &[]).is_err());
        assert!(cond_entropy_mmse(0.0, &[1.0]).is_err());
        assert!(cond_entropy_mmse(1.0, &[-1.0]).is_err());
    }
}
