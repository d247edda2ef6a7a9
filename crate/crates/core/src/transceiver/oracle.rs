//! Exhaustive reference solver for small instances.
//!
//! Each device's allocation is parametrized by the fraction of its budget it
//! spends and a stick-breaking split of that energy over the subcarriers, so
//! every point of the unit box is feasible. The MSE receive coefficients are
//! eliminated in closed form. A uniform grid over the box is scanned and the
//! best few points are refined by compass search with halving steps.

use ndarray::Array2;

use super::{md_objective, mse_objective, optimal_rx, FdmInstance, SolveDetail, SolveReport};
use crate::aircomp::{Scheme, TransceiverDesign};
use crate::error::{Error, Result};
use crate::par::{map_indexed, Execution};

/// Largest number of free transmit coefficients the oracle accepts.
pub const MAX_ORACLE_COEFFICIENTS: usize = 6;

const STARTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleObjective {
    Mse,
    Md,
}

fn decode(inst: &FdmInstance, p: &[f64], tx: &mut Array2<f64>) {
    let (kk, nn) = inst.gains.dim();
    for k in 0..kk {
        let q = &p[k * nn..(k + 1) * nn];
        let energy = q[0] * inst.budgets[k];
        let mut rest = 1.0;
        for n in 0..nn {
            let share = if n + 1 == nn { rest } else { rest * q[n + 1] };
            rest -= share;
            tx[[k, n]] = (energy * share.max(0.0) / inst.moments[[k, n]]).sqrt();
        }
    }
}

/// Larger is better.
fn score(inst: &FdmInstance, objective: OracleObjective, tx: &Array2<f64>) -> f64 {
    match objective {
        OracleObjective::Md => md_objective(inst, tx),
        OracleObjective::Mse => -(0..inst.num_subcarriers())
            .map(|n| {
                let (mut total, mut num, mut den) = (0.0, 0.0, inst.noise_var);
                for k in 0..inst.num_devices() {
                    let s = inst.est_vars[[k, n]];
                    let c = inst.gains[[k, n]] * tx[[k, n]];
                    total += s;
                    num += c * s;
                    den += c * c * s;
                }
                if den > 0.0 {
                    total - num * num / den
                } else {
                    total
                }
            })
            .sum::<f64>(),
    }
}

fn keep_best(best: &mut Vec<(f64, Vec<f64>)>, value: f64, point: &[f64]) {
    if best.len() == STARTS && value <= best[STARTS - 1].0 {
        return;
    }
    let pos = best.iter().position(|(v, _)| value > *v).unwrap_or(best.len());
    best.insert(pos, (value, point.to_vec()));
    best.truncate(STARTS);
}

/// Best design found by grid search plus refinement. `grid_resolution` is
/// the number of grid values per coordinate (at least 2) and `refine_steps`
/// the number of step halvings allowed during refinement.
pub fn brute_force_oracle(
    inst: &FdmInstance,
    objective: OracleObjective,
    grid_resolution: usize,
    refine_steps: usize,
) -> Result<SolveReport> {
    inst.validate()?;
    let dims = inst.gains.len();
    if dims > MAX_ORACLE_COEFFICIENTS {
        return Err(Error::validation(format!(
            "oracle handles at most {MAX_ORACLE_COEFFICIENTS} coefficients, instance has {dims}"
        )));
    }
    if grid_resolution < 2 {
        return Err(Error::validation("grid resolution must be at least 2"));
    }
    let g = grid_resolution;
    let level = |i: usize| i as f64 / (g - 1) as f64;
    let inner_count = g.pow(dims as u32 - 1);

    let partial = map_indexed(g, Execution::Parallel, |first| {
        let mut tx = Array2::zeros(inst.gains.dim());
        let mut point = vec![0.0; dims];
        let mut best = Vec::with_capacity(STARTS + 1);
        point[0] = level(first);
        for idx in 0..inner_count {
            let mut rem = idx;
            for p in point.iter_mut().skip(1) {
                *p = level(rem % g);
                rem /= g;
            }
            decode(inst, &point, &mut tx);
            keep_best(&mut best, score(inst, objective, &tx), &point);
        }
        best
    });
    let mut starts = Vec::with_capacity(STARTS + 1);
    for list in partial {
        for (v, p) in list {
            keep_best(&mut starts, v, &p);
        }
    }
    let mut evaluations = g.pow(dims as u32);

    let mut tx = Array2::zeros(inst.gains.dim());
    let mut winner: Option<(f64, Vec<f64>)> = None;
    for (mut value, mut point) in starts {
        let mut step = 1.0 / (g - 1) as f64;
        let mut halvings = 0;
        let mut passes = 0;
        while halvings <= refine_steps && passes < 200 * (refine_steps + 1) {
            passes += 1;
            let mut improved = false;
            for d in 0..dims {
                for dir in [1.0, -1.0] {
                    let old = point[d];
                    let cand = (old + dir * step).clamp(0.0, 1.0);
                    if cand == old {
                        continue;
                    }
                    point[d] = cand;
                    decode(inst, &point, &mut tx);
                    let v = score(inst, objective, &tx);
                    evaluations += 1;
                    if v > value {
                        value = v;
                        improved = true;
                        break;
                    }
                    point[d] = old;
                }
            }
            if !improved {
                step *= 0.5;
                halvings += 1;
            }
        }
        if winner.as_ref().is_none_or(|(w, _)| value > *w) {
            winner = Some((value, point));
        }
    }
    let (_, point) = winner.expect("grid has at least one point");
    decode(inst, &point, &mut tx);
    let rx = optimal_rx(inst, &tx);
    let value = match objective {
        OracleObjective::Mse => mse_objective(inst, &tx, &rx),
        OracleObjective::Md => md_objective(inst, &tx),
    };
    Ok(SolveReport {
        design: TransceiverDesign {
            tx,
            rx,
            scheme: if inst.num_subcarriers() == 1 { Scheme::Tdm } else { Scheme::Fdm },
        },
        objective: value,
        iterations: evaluations,
        kkt_residual: 0.0,
        detail: SolveDetail::Oracle { evaluations },
    })
}
