//! Dual decomposition for the multi-subcarrier designs.
//!
//! For fixed power prices `lambda_k` the Lagrangian splits per subcarrier.
//! Each subcarrier then reduces to one scalar equation in an auxiliary
//! variable (`r_n = a_n^2` for MSE, `z_n^2` for MD) whose left-hand side is
//! a convex decreasing sum of inverse squares; the transmit coefficients
//! follow in closed form. The outer loop moves the prices until every budget
//! is met with complementary slackness.

use ndarray::Array2;

use super::roots::{decreasing_root, solve_inverse_square_sum, InvSquareTerm};
use super::{md_objective, mse_objective, optimal_rx, DualUpdate, FdmInstance, SolveDetail, SolveReport, SolverOptions};
use crate::aircomp::{Scheme, TransceiverDesign};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Goal {
    Mse,
    Md,
}

/// Per-subcarrier Lagrangian maximizer for fixed prices. Returns the
/// transmit column values and the auxiliary variable (`sqrt(r)` or `z`).
fn inner_column(inst: &FdmInstance, goal: Goal, lambda: &[f64], n: usize, out: &mut [f64]) -> f64 {
    let kk = inst.num_devices();
    let sw = inst.noise_var;
    let delta = inst.delta[n];
    if goal == Goal::Md && delta == 0.0 {
        out.iter_mut().for_each(|b| *b = 0.0);
        return 0.0;
    }
    let terms: Vec<InvSquareTerm> = (0..kk)
        .map(|k| {
            let h2 = inst.gains[[k, n]].powi(2);
            let s = inst.est_vars[[k, n]];
            let v = inst.moments[[k, n]];
            match goal {
                Goal::Mse => InvSquareTerm {
                    alpha: lambda[k] * v * h2 * s * s,
                    beta: h2 * s,
                    gamma: lambda[k] * v,
                },
                Goal::Md => InvSquareTerm {
                    alpha: lambda[k] * h2 * v,
                    beta: delta * h2 * s,
                    gamma: lambda[k] * v,
                },
            }
        })
        .collect();
    let target = match goal {
        Goal::Mse => sw,
        Goal::Md => sw / delta,
    };
    let w = solve_inverse_square_sum(&terms, target);
    let root = w.sqrt();
    for k in 0..kk {
        let h = inst.gains[[k, n]];
        let s = inst.est_vars[[k, n]];
        let price = lambda[k] * inst.moments[[k, n]];
        out[k] = if price > 0.0 {
            match goal {
                Goal::Mse => root * h * s / (w * h * h * s + price),
                Goal::Md => delta * h * root / (price + delta * s * h * h * w),
            }
        } else if root > 0.0 {
            match goal {
                Goal::Mse => 1.0 / (root * h),
                Goal::Md => 1.0 / (s * h * root),
            }
        } else {
            f64::INFINITY
        };
    }
    root
}

fn inner(inst: &FdmInstance, goal: Goal, lambda: &[f64]) -> (Array2<f64>, Vec<f64>) {
    let (kk, nn) = inst.gains.dim();
    let mut tx = Array2::zeros((kk, nn));
    let mut col = vec![0.0; kk];
    let aux = (0..nn)
        .map(|n| {
            let r = inner_column(inst, goal, lambda, n, &mut col);
            tx.column_mut(n).iter_mut().zip(&col).for_each(|(t, c)| *t = *c);
            r
        })
        .collect();
    (tx, aux)
}

fn device_power(inst: &FdmInstance, tx: &Array2<f64>, k: usize) -> f64 {
    (0..inst.num_subcarriers())
        .map(|n| inst.moments[[k, n]] * tx[[k, n]] * tx[[k, n]])
        .sum()
}

/// Exact update of one price: zero if the budget holds without it,
/// otherwise the price at which device `k` spends exactly its budget.
fn coordinate_price(inst: &FdmInstance, goal: Goal, lambda: &mut [f64], k: usize) {
    let budget = inst.budgets[k];
    let current = lambda[k];
    let excess = |x: f64, lambda: &mut [f64]| {
        lambda[k] = x;
        let (tx, _) = inner(inst, goal, lambda);
        device_power(inst, &tx, k) - budget
    };
    if excess(0.0, lambda) <= 0.0 {
        lambda[k] = 0.0;
        return;
    }
    let (mut lo, mut hi) = (0.0, current.max(1e-12));
    let mut doublings = 0;
    while excess(hi, lambda) > 0.0 && doublings < 2000 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
    }
    let mut scratch = lambda.to_vec();
    let root = decreasing_root(|x| excess(x, &mut scratch), lo, hi, 1e-15);
    lambda[k] = root;
}

/// `ln(power / budget)` of every device with a positive price.
fn log_excess(inst: &FdmInstance, goal: Goal, lambda: &[f64], active: &[usize]) -> Vec<f64> {
    let (tx, _) = inner(inst, goal, lambda);
    active
        .iter()
        .map(|&k| (device_power(inst, &tx, k) / inst.budgets[k]).ln())
        .collect()
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if !(a[p][c].abs() > 1e-300) {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for j in c..n {
                a[r][j] -= f * a[c][j];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|j| a[r][j] * x[j]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// One Newton step on the active prices in log space. The coordinate sweep
/// alone converges only linearly when the devices are strongly coupled
/// through a shared subcarrier. The step is kept only if it shrinks the
/// largest budget mismatch.
fn newton_step(inst: &FdmInstance, goal: Goal, lambda: &mut [f64]) {
    let active: Vec<usize> = (0..lambda.len()).filter(|&k| lambda[k] > 0.0).collect();
    if active.is_empty() {
        return;
    }
    let g = log_excess(inst, goal, lambda, &active);
    let norm = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let g_norm = norm(&g);
    if !g_norm.is_finite() || g_norm == 0.0 {
        return;
    }
    let step: f64 = 1e-6;
    let mut jac = vec![vec![0.0; active.len()]; active.len()];
    let mut probe = lambda.to_vec();
    for (j, &k) in active.iter().enumerate() {
        probe[k] = lambda[k] * step.exp();
        let gp = log_excess(inst, goal, &probe, &active);
        probe[k] = lambda[k];
        for i in 0..active.len() {
            jac[i][j] = (gp[i] - g[i]) / step;
        }
    }
    let Some(dx) = solve_dense(jac, g.iter().map(|v| -v).collect()) else {
        return;
    };
    let mut t = 1.0;
    for _ in 0..30 {
        let trial: Vec<f64> = lambda
            .iter()
            .enumerate()
            .map(|(k, &l)| match active.iter().position(|&a| a == k) {
                Some(i) => l * (t * dx[i]).clamp(-50.0, 50.0).exp(),
                None => l,
            })
            .collect();
        if norm(&log_excess(inst, goal, &trial, &active)) < g_norm {
            lambda.copy_from_slice(&trial);
            return;
        }
        t *= 0.5;
    }
}

fn max_violation(inst: &FdmInstance, power: &[f64]) -> f64 {
    power
        .iter()
        .zip(&inst.budgets)
        .map(|(p, b)| ((p - b) / b).max(0.0))
        .fold(0.0, f64::max)
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num.abs() / den
    } else {
        0.0
    }
}

/// Largest of the relative stationarity, complementary slackness and
/// feasibility residuals, plus the MD consistency residual.
fn kkt_residual(inst: &FdmInstance, goal: Goal, tx: &Array2<f64>, rx: &[f64], lambda: &[f64], aux: &[f64]) -> f64 {
    let (kk, nn) = inst.gains.dim();
    let mut worst: f64 = 0.0;
    for n in 0..nn {
        let (mut sum, mut den) = (0.0, inst.noise_var);
        for k in 0..kk {
            let c = inst.gains[[k, n]] * tx[[k, n]];
            sum += c;
            den += c * c * inst.est_vars[[k, n]];
        }
        let z = sum / den;
        if goal == Goal::Md && inst.delta[n] > 0.0 {
            worst = worst.max(ratio(aux[n] - z, z.max(aux[n])));
        }
        for k in 0..kk {
            let h = inst.gains[[k, n]];
            let s = inst.est_vars[[k, n]];
            let b = tx[[k, n]];
            let t3 = lambda[k] * inst.moments[[k, n]] * b;
            let r = match goal {
                Goal::Mse => {
                    let a = rx[n];
                    let t1 = a * a * h * h * s * b;
                    let t2 = a * h * s;
                    ratio(t1 - t2 + t3, t1 + t2 + t3)
                }
                Goal::Md => {
                    let d = inst.delta[n];
                    let t1 = d * h * z;
                    let t2 = d * h * h * z * z * b * s;
                    ratio(t1 - t2 - t3, t1 + t2 + t3)
                }
            };
            worst = worst.max(r);
        }
    }
    let power = inst.power_usage(tx);
    for k in 0..kk {
        let rel = (power[k] - inst.budgets[k]) / inst.budgets[k];
        worst = worst.max(rel.max(0.0));
        if lambda[k] > 0.0 {
            worst = worst.max(rel.abs());
        }
    }
    worst
}

/// Scales down any over-budget rows, attaches the receive side and accepts
/// the design if its KKT residual meets the tolerance.
fn finish(
    inst: &FdmInstance,
    goal: Goal,
    mut tx: Array2<f64>,
    lambda: &[f64],
    aux: &[f64],
    iterations: usize,
    opts: &SolverOptions,
) -> Option<SolveReport> {
    let power = inst.power_usage(&tx);
    for k in 0..inst.num_devices() {
        if power[k] > inst.budgets[k] {
            let f = (inst.budgets[k] / power[k]).sqrt();
            tx.row_mut(k).iter_mut().for_each(|b| *b *= f);
        }
    }
    let rx = optimal_rx(inst, &tx);
    let kkt = kkt_residual(inst, goal, &tx, &rx, lambda, aux);
    if !(kkt <= opts.kkt_tol) {
        return None;
    }
    let objective = match goal {
        Goal::Mse => mse_objective(inst, &tx, &rx),
        Goal::Md => md_objective(inst, &tx),
    };
    Some(SolveReport {
        design: TransceiverDesign {
            tx,
            rx,
            scheme: Scheme::Fdm,
        },
        objective,
        iterations,
        kkt_residual: kkt,
        detail: SolveDetail::Duals { lambda: lambda.to_vec() },
    })
}

/// Transmit coefficient on one subcarrier for price `lambda` and auxiliary
/// value `x` (`a_n` for MSE, `z_n` for MD).
fn coefficient(inst: &FdmInstance, goal: Goal, k: usize, n: usize, lambda: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let h = inst.gains[[k, n]];
    let s = inst.est_vars[[k, n]];
    let price = lambda * inst.moments[[k, n]];
    match goal {
        Goal::Mse => x * h * s / (x * x * h * h * s + price),
        Goal::Md => {
            let d = inst.delta[n];
            d * h * x / (price + d * s * h * h * x * x)
        }
    }
}

/// Budget-meeting price of device `k` with the auxiliary values frozen.
fn frozen_price(inst: &FdmInstance, goal: Goal, k: usize, x: &[f64]) -> f64 {
    let power = |l: f64| -> f64 {
        (0..x.len())
            .map(|n| inst.moments[[k, n]] * coefficient(inst, goal, k, n, l, x[n]).powi(2))
            .sum()
    };
    let budget = inst.budgets[k];
    if power(0.0) <= budget {
        return 0.0;
    }
    let mut hi = 1.0;
    let mut doublings = 0;
    while power(hi) > budget && doublings < 2000 {
        hi *= 2.0;
        doublings += 1;
    }
    decreasing_root(|l| power(l) - budget, 0.0, hi, 1e-15)
}

/// Prices and coefficients for frozen auxiliaries, and the auxiliaries
/// those coefficients imply.
fn frozen_map(inst: &FdmInstance, goal: Goal, x: &[f64]) -> (Vec<f64>, Array2<f64>, Vec<f64>) {
    let (kk, nn) = inst.gains.dim();
    let lambda: Vec<f64> = (0..kk).map(|k| frozen_price(inst, goal, k, x)).collect();
    let tx = Array2::from_shape_fn((kk, nn), |(k, n)| coefficient(inst, goal, k, n, lambda[k], x[n]));
    let next = (0..nn)
        .map(|n| {
            if x[n] == 0.0 {
                return 0.0;
            }
            let (mut sum, mut den) = (0.0, inst.noise_var);
            for k in 0..kk {
                let c = inst.gains[[k, n]] * tx[[k, n]];
                sum += c * if goal == Goal::Mse { inst.est_vars[[k, n]] } else { 1.0 };
                den += c * c * inst.est_vars[[k, n]];
            }
            sum / den
        })
        .collect();
    (lambda, tx, next)
}

/// Fixed point in the auxiliary variables. With them frozen every price
/// decouples into a monotone scalar equation, which stays well conditioned
/// in the low-SNR regime where the prices themselves are nearly degenerate
/// and the coordinate sweep crawls. Plain iteration settles which
/// subcarriers are used (unused ones decay geometrically); Newton steps in
/// log space then finish the active ones. The point is only returned when
/// the exact per-subcarrier maximizer at its prices uses the same
/// subcarriers.
fn polish(inst: &FdmInstance, goal: Goal, aux: &[f64]) -> Option<(Array2<f64>, Vec<f64>, Vec<f64>)> {
    let nn = inst.num_subcarriers();
    let usable: Vec<bool> = (0..nn).map(|n| goal == Goal::Mse || inst.delta[n] > 0.0).collect();
    let top = aux.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
    let seed = if top > 0.0 { top } else { 1.0 };
    let mut x: Vec<f64> = (0..nn)
        .map(|n| match usable[n] {
            true if aux[n].is_finite() && aux[n] > 0.0 => aux[n],
            true => 1e-3 * seed,
            false => 0.0,
        })
        .collect();
    for _round in 0..4 {
        for _ in 0..60 {
            let (_, _, next) = frozen_map(inst, goal, &x);
            if next.iter().any(|v| !v.is_finite()) {
                return None;
            }
            x = next;
        }
        let top = x.iter().copied().fold(0.0, f64::max);
        if !(top > 0.0) {
            return None;
        }
        x.iter_mut().filter(|v| **v < 1e-9 * top).for_each(|v| *v = 0.0);
        let active: Vec<usize> = (0..nn).filter(|&n| x[n] > 0.0).collect();
        let resid = |x: &[f64]| -> Option<Vec<f64>> {
            let (_, _, next) = frozen_map(inst, goal, x);
            let r: Vec<f64> = active.iter().map(|&n| (next[n] / x[n]).ln()).collect();
            r.iter().all(|v| v.is_finite()).then_some(r)
        };
        let norm = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for _ in 0..60 {
            let r = resid(&x)?;
            let r_norm = norm(&r);
            if r_norm <= 1e-14 {
                break;
            }
            let step: f64 = 1e-7;
            let mut jac = vec![vec![0.0; active.len()]; active.len()];
            for (j, &n) in active.iter().enumerate() {
                let mut probe = x.clone();
                probe[n] *= step.exp();
                let rp = resid(&probe)?;
                for i in 0..active.len() {
                    jac[i][j] = (rp[i] - r[i]) / step;
                }
            }
            let Some(dy) = solve_dense(jac, r.iter().map(|v| -v).collect()) else {
                break;
            };
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let mut trial = x.clone();
                for (i, &n) in active.iter().enumerate() {
                    trial[n] *= (t * dy[i]).clamp(-20.0, 20.0).exp();
                }
                if resid(&trial).is_some_and(|rt| norm(&rt) < r_norm) {
                    x = trial;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let (lambda, tx, _) = frozen_map(inst, goal, &x);
        let (reference, ref_aux) = inner(inst, goal, &lambda);
        let support = |n: usize| reference.column(n).iter().any(|&b| b != 0.0);
        if (0..nn).all(|n| (x[n] > 0.0) == support(n)) {
            return Some((tx, lambda, x));
        }
        x = (0..nn)
            .map(|n| if support(n) && ref_aux[n].is_finite() { ref_aux[n] } else { 0.0 })
            .collect();
    }
    None
}

fn solve(inst: &FdmInstance, goal: Goal, opts: &SolverOptions) -> Result<SolveReport> {
    inst.validate()?;
    opts.validate()?;
    if !(inst.noise_var > 0.0) {
        return Err(Error::validation("dual FDM solvers need a positive receiver noise variance"));
    }
    if goal == Goal::Md && inst.delta.iter().all(|&d| d == 0.0) {
        return Err(Error::validation("MD design needs a positive delta on some subcarrier"));
    }
    let kk = inst.num_devices();
    let mut lambda = vec![1.0; kk];
    let mut change = f64::INFINITY;
    let mut violation = f64::INFINITY;
    for iter in 1..=opts.max_iters {
        let prev = lambda.clone();
        match opts.dual_update {
            DualUpdate::CoordinateBisection => {
                for k in 0..kk {
                    coordinate_price(inst, goal, &mut lambda, k);
                }
                newton_step(inst, goal, &mut lambda);
            }
            DualUpdate::Subgradient { step } => {
                let (tx, _) = inner(inst, goal, &lambda);
                let power = inst.power_usage(&tx);
                let t = step / (iter as f64).sqrt();
                for k in 0..kk {
                    let g = power[k] - inst.budgets[k];
                    lambda[k] = if g.is_finite() {
                        (lambda[k] + t * g).max(0.0)
                    } else {
                        lambda[k] * 2.0 + t
                    };
                }
            }
        }
        let (tx, aux) = inner(inst, goal, &lambda);
        let power = inst.power_usage(&tx);
        change = lambda
            .iter()
            .zip(&prev)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        violation = max_violation(inst, &power);
        if change <= opts.eps_lambda && violation <= opts.eps_power {
            if let Some(r) = finish(inst, goal, tx, &lambda, &aux, iter, opts) {
                return Ok(r);
            }
        }
        if matches!(opts.dual_update, DualUpdate::CoordinateBisection) {
            if let Some((tx, lam, aux)) = polish(inst, goal, &aux) {
                if let Some(r) = finish(inst, goal, tx, &lam, &aux, iter, opts) {
                    return Ok(r);
                }
            }
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iters,
        dual_change: change,
        power_violation: violation,
    })
}

/// MSE-optimal FDM design by dual decomposition.
pub fn fdm_mse_dual(inst: &FdmInstance, opts: &SolverOptions) -> Result<SolveReport> {
    solve(inst, Goal::Mse, opts)
}

/// MD-optimal FDM design by dual decomposition. Subcarriers with zero
/// `delta` carry no power. The receive coefficients are the MSE-optimal ones
/// for the returned transmit side, since the MD objective ignores them.
pub fn fdm_md_optimal(inst: &FdmInstance, opts: &SolverOptions) -> Result<SolveReport> {
    solve(inst, Goal::Md, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transceiver::{tdm_md_optimal, tdm_mse_optimal, TdmInstance};
    use ndarray::array;

    fn flat(k: usize, n: usize, h: f64) -> FdmInstance {
        FdmInstance {
            gains: Array2::from_elem((k, n), h),
            budgets: vec![1.0; k],
            moments: Array2::ones((k, n)),
            est_vars: Array2::ones((k, n)),
            noise_var: 0.1,
            delta: vec![1.0; n],
        }
    }

    #[test]
    fn single_subcarrier_matches_the_tdm_closed_forms() {
        let t = TdmInstance {
            gains: vec![1.0, 0.6, 0.3],
            budgets: vec![1.0, 1.0, 1.0],
            moments: vec![1.0, 1.0, 1.0],
            est_vars: vec![1.0, 1.0, 1.0],
            noise_var: 0.1,
            delta: 1.0,
        };
        let f = t.as_fdm();
        let opts = SolverOptions::default();
        let a = fdm_mse_dual(&f, &opts).unwrap();
        let b = tdm_mse_optimal(&t).unwrap();
        assert!((a.objective - b.objective).abs() <= 1e-6 * b.objective, "{} {}", a.objective, b.objective);
        let c = fdm_md_optimal(&f, &opts).unwrap();
        let d = tdm_md_optimal(&t).unwrap();
        assert!((c.objective - d.objective).abs() <= 1e-6 * d.objective, "{} {}", c.objective, d.objective);
    }

    #[test]
    fn flat_channels_split_power_evenly() {
        let inst = flat(3, 4, 0.8);
        let opts = SolverOptions::default();
        for r in [fdm_mse_dual(&inst, &opts).unwrap(), fdm_md_optimal(&inst, &opts).unwrap()] {
            for k in 0..3 {
                let row = r.design.tx.row(k);
                for n in 1..4 {
                    assert!((row[n] * row[n] - row[0] * row[0]).abs() < 1e-6);
                }
            }
            assert!(r.kkt_residual <= 1e-6);
        }
    }

    #[test]
    fn designs_respect_budgets_and_kkt() {
        let inst = FdmInstance {
            gains: array![[1.2, 0.3, 0.9], [0.4, 1.7, 0.6]],
            budgets: vec![1.0, 0.5],
            moments: array![[1.0, 0.8, 1.2], [0.7, 1.1, 1.0]],
            est_vars: array![[0.9, 1.0, 1.1], [1.2, 0.8, 1.0]],
            noise_var: 0.2,
            delta: vec![0.7, 1.3, 0.4],
        };
        let opts = SolverOptions::default();
        let mse = fdm_mse_dual(&inst, &opts).unwrap();
        let md = fdm_md_optimal(&inst, &opts).unwrap();
        for r in [&mse, &md] {
            r.design.check_power(&inst.budgets, &inst.moments).unwrap();
            assert!(r.kkt_residual <= 1e-6, "{}", r.kkt_residual);
        }
        assert!(mse.objective <= mse_objective(&inst, &md.design.tx, &md.design.rx) * (1.0 + 1e-6));
        assert!(md.objective >= md_objective(&inst, &mse.design.tx) * (1.0 - 1e-6));
    }

    #[test]
    fn zero_delta_subcarrier_stays_silent() {
        let mut inst = flat(2, 3, 1.0);
        inst.delta = vec![1.0, 0.0, 2.0];
        let r = fdm_md_optimal(&inst, &SolverOptions::default()).unwrap();
        assert!(r.design.tx.column(1).iter().all(|&b| b == 0.0));
        assert!(r.design.tx.column(2).iter().all(|&b| b > 0.0));
    }

    #[test]
    fn subgradient_variant_agrees_loosely() {
        let inst = flat(2, 2, 0.9);
        let opts = SolverOptions {
            dual_update: DualUpdate::Subgradient { step: 0.5 },
            max_iters: 200_000,
            kkt_tol: 1e-3,
            ..SolverOptions::default()
        };
        let sub = fdm_mse_dual(&inst, &opts).unwrap();
        let exact = fdm_mse_dual(&inst, &SolverOptions::default()).unwrap();
        assert!((sub.objective - exact.objective).abs() < 1e-3 * exact.objective);
    }

    #[test]
    fn noiseless_receiver_is_rejected() {
        let mut inst = flat(2, 2, 1.0);
        inst.noise_var = 0.0;
        assert!(fdm_mse_dual(&inst, &SolverOptions::default()).is_err());
    }

    #[test]
    fn iteration_budget_is_reported() {
        let inst = flat(2, 2, 1.0);
        let opts = SolverOptions {
            dual_update: DualUpdate::Subgradient { step: 1e-6 },
            max_iters: 3,
            ..SolverOptions::default()
        };
        assert!(matches!(fdm_mse_dual(&inst, &opts), Err(Error::NonConvergence { iterations: 3, .. })));
    }
}
