//! Closed-form per-slot TDM designs.

use ndarray::Array2;

use super::{optimal_rx, SolveDetail, SolveReport, TdmInstance};
use crate::aircomp::{Scheme, TransceiverDesign};
use crate::error::{Error, Result};

/// Indices sorted by ascending `u`, ties by index.
fn ascending(u: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..u.len()).collect();
    order.sort_by(|&i, &j| u[i].total_cmp(&u[j]).then(i.cmp(&j)));
    order
}

/// MSE of the capped design `c_k = min(u_k, 1/a)` for receive scale `a`.
fn capped_mse(u: &[f64], s: &[f64], noise_var: f64, a: f64) -> f64 {
    let mis: f64 = u
        .iter()
        .zip(s)
        .map(|(&u, &s)| {
            let e = (1.0 - a * u).max(0.0);
            e * e * s
        })
        .sum();
    mis + a * a * noise_var
}

fn single_column(tx: Vec<f64>, rx: f64) -> TransceiverDesign {
    let k = tx.len();
    TransceiverDesign {
        tx: Array2::from_shape_vec((k, 1), tx).expect("shape matches"),
        rx: vec![rx],
        scheme: Scheme::Tdm,
    }
}

/// MSE-optimal slot design. The devices with the weakest effective links
/// transmit at full power and the others invert their channel towards the
/// common receive scale. Every threshold is tried and the best kept.
pub fn tdm_mse_optimal(inst: &TdmInstance) -> Result<SolveReport> {
    inst.validate()?;
    let u = inst.effective_links();
    let s = &inst.est_vars;
    let order = ascending(&u);

    let mut best: Option<(f64, f64, usize)> = None;
    let (mut num, mut den) = (0.0, inst.noise_var);
    for (idx, &k) in order.iter().enumerate() {
        num += u[k] * s[k];
        den += u[k] * u[k] * s[k];
        let a = if den > 0.0 { num / den } else { 0.0 };
        let mse = capped_mse(&u, s, inst.noise_var, a);
        if best.is_none_or(|(m, _, _)| mse < m) {
            best = Some((mse, a, idx + 1));
        }
    }
    let (mse, a, k_star) = best.expect("at least one device");

    let tx: Vec<f64> = (0..u.len())
        .map(|k| {
            let full = (inst.budgets[k] / inst.moments[k]).sqrt();
            if a * u[k] <= 1.0 {
                full
            } else {
                1.0 / (a * inst.gains[k])
            }
        })
        .collect();

    // derivative of the capped MSE in a, relative to its term magnitudes
    let (mut g, mut scale) = (a * inst.noise_var, a * inst.noise_var);
    for k in 0..u.len() {
        let e = (1.0 - a * u[k]).max(0.0);
        g -= s[k] * u[k] * e;
        scale += s[k] * u[k] * e;
    }
    let kkt = if scale > 0.0 { g.abs() / scale } else { 0.0 };

    Ok(SolveReport {
        design: single_column(tx, a),
        objective: mse,
        iterations: u.len(),
        kkt_residual: kkt,
        detail: SolveDetail::Threshold { k_star, order },
    })
}

fn homogeneous(v: &[f64]) -> Option<f64> {
    let first = v[0];
    v.iter()
        .all(|&x| (x - first).abs() <= 1e-12 * first.abs())
        .then_some(first)
}

/// `Delta' (sum c)^2 / (sum c^2 + sigma_eq^2)` for `c_k = min(u_k, tau)`.
fn capped_md(u: &[f64], tau: f64, delta_eq: f64, noise_eq: f64) -> f64 {
    let (mut s, mut q) = (0.0, noise_eq);
    for &x in u {
        let c = x.min(tau);
        s += c;
        q += c * c;
    }
    if s > 0.0 {
        delta_eq * s * s / q
    } else {
        0.0
    }
}

/// MD-optimal slot design: every `|h_k b_k|` is capped at a common level
/// `tau`, so devices whose full power lands below it transmit at full power.
/// Needs one estimate variance shared by all devices.
pub fn tdm_md_optimal(inst: &TdmInstance) -> Result<SolveReport> {
    inst.validate()?;
    if !(inst.delta > 0.0) {
        return Err(Error::validation("MD design needs a positive delta"));
    }
    let s = homogeneous(&inst.est_vars).ok_or_else(|| {
        Error::Unsupported(
            "MD-optimal TDM design needs equal estimate variances across devices; use the brute-force oracle".into(),
        )
    })?;
    let delta_eq = inst.delta / s;
    let noise_eq = inst.noise_var / s;
    let u = inst.effective_links();
    let order = ascending(&u);
    let sorted: Vec<f64> = order.iter().map(|&k| u[k]).collect();
    let kk = sorted.len();

    // segment j (1-based) covers tau in [u_j, u_{j+1}]; on it the objective
    // rises up to tau_j and falls after it
    let (mut s1, mut s2) = (0.0, 0.0);
    let mut best: Option<(f64, f64, bool)> = None;
    for j in 0..kk {
        s1 += sorted[j];
        s2 += sorted[j] * sorted[j];
        let (tau, interior) = if j + 1 == kk {
            (sorted[j], false)
        } else {
            let t = if s1 > 0.0 { (s2 + noise_eq) / s1 } else { f64::INFINITY };
            let clamped = t.clamp(sorted[j], sorted[j + 1]);
            (clamped, clamped == t && t > sorted[j] && t < sorted[j + 1])
        };
        let f = capped_md(&sorted, tau, delta_eq, noise_eq);
        let better = match best {
            None => true,
            Some((bf, bt, _)) => f > bf || (f == bf && tau < bt),
        };
        if better {
            best = Some((f, tau, interior));
        }
    }
    let (md, tau, interior) = best.expect("at least one device");

    let tx: Vec<f64> = (0..kk)
        .map(|k| {
            if u[k] <= tau {
                (inst.budgets[k] / inst.moments[k]).sqrt()
            } else {
                tau / inst.gains[k]
            }
        })
        .collect();
    let fdm = inst.as_fdm();
    let tx = Array2::from_shape_vec((kk, 1), tx).expect("shape matches");
    let rx = optimal_rx(&fdm, &tx)[0];

    // stationarity of the interior segment point: sum c^2 + sigma_eq^2 = tau sum c
    let kkt = if interior {
        let (mut q, mut sum) = (noise_eq, 0.0);
        for &x in &sorted {
            let c = x.min(tau);
            q += c * c;
            sum += c;
        }
        (q - tau * sum).abs() / q
    } else {
        0.0
    };

    Ok(SolveReport {
        design: TransceiverDesign {
            tx,
            rx: vec![rx],
            scheme: Scheme::Tdm,
        },
        objective: md,
        iterations: kk,
        kkt_residual: kkt,
        detail: SolveDetail::Tau { tau },
    })
}
