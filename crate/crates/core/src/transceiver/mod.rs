//! Transceiver design: closed-form TDM solvers, dual-decomposition FDM
//! solvers, two baselines and a brute-force reference.
//!
//! Everything works on magnitudes and on the unit-gain aggregation target.
//! A TDM instance describes one slot; the slot-invariant channel makes the
//! per-slot problems independent, see [`solve_tdm_slots`].

mod baseline;
mod fdm;
mod oracle;
mod roots;
mod tdm;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::aircomp::{ChannelRealization, Scheme, TransceiverDesign};
use crate::error::{Error, Result};

pub use baseline::{baseline_channel_inversion, baseline_equal};
pub use fdm::{fdm_md_optimal, fdm_mse_dual};
pub use oracle::{brute_force_oracle, OracleObjective, MAX_ORACLE_COEFFICIENTS};
pub use tdm::{tdm_md_optimal, tdm_mse_optimal};

/// Data of one TDM slot.
#[derive(Debug, Clone, PartialEq)]
pub struct TdmInstance {
    pub gains: Vec<f64>,
    pub budgets: Vec<f64>,
    pub moments: Vec<f64>,
    pub est_vars: Vec<f64>,
    pub noise_var: f64,
    pub delta: f64,
}

/// Data of an FDM problem, devices by rows and subcarriers by columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FdmInstance {
    pub gains: Array2<f64>,
    pub budgets: Vec<f64>,
    pub moments: Array2<f64>,
    pub est_vars: Array2<f64>,
    pub noise_var: f64,
    pub delta: Vec<f64>,
}

fn positive<'a>(name: &str, v: impl IntoIterator<Item = &'a f64>) -> Result<()> {
    if v.into_iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::validation(format!("{name} must be finite and positive")));
    }
    Ok(())
}

impl TdmInstance {
    pub fn num_devices(&self) -> usize {
        self.gains.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.gains.len();
        if k == 0 {
            return Err(Error::validation("instance needs at least one device"));
        }
        for (name, v) in [
            ("budgets", &self.budgets),
            ("moments", &self.moments),
            ("est_vars", &self.est_vars),
        ] {
            if v.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    got: v.len(),
                });
            }
            positive(name, v.iter())?;
        }
        positive("gains", &self.gains)?;
        if !(self.noise_var >= 0.0 && self.noise_var.is_finite()) {
            return Err(Error::validation("noise variance must be finite and nonnegative"));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::validation("delta must be finite and nonnegative"));
        }
        Ok(())
    }

    /// `u_k = |h_k| sqrt(P_k) / nu_k`, the largest reachable `|h_k b_k|`.
    pub fn effective_links(&self) -> Vec<f64> {
        (0..self.num_devices())
            .map(|k| self.gains[k] * (self.budgets[k] / self.moments[k]).sqrt())
            .collect()
    }

    /// The same slot as a one-subcarrier FDM instance.
    pub fn as_fdm(&self) -> FdmInstance {
        let k = self.num_devices();
        let col = |v: &[f64]| Array2::from_shape_fn((k, 1), |(i, _)| v[i]);
        FdmInstance {
            gains: col(&self.gains),
            budgets: self.budgets.clone(),
            moments: col(&self.moments),
            est_vars: col(&self.est_vars),
            noise_var: self.noise_var,
            delta: vec![self.delta],
        }
    }
}

impl FdmInstance {
    pub fn num_devices(&self) -> usize {
        self.gains.nrows()
    }

    pub fn num_subcarriers(&self) -> usize {
        self.gains.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let (k, n) = self.gains.dim();
        if k == 0 || n == 0 {
            return Err(Error::validation("instance needs at least one device and one subcarrier"));
        }
        for m in [&self.moments, &self.est_vars] {
            if m.dim() != (k, n) {
                return Err(Error::DimensionMismatch {
                    expected: k * n,
                    got: m.len(),
                });
            }
        }
        if self.budgets.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: self.budgets.len(),
            });
        }
        if self.delta.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.delta.len(),
            });
        }
        positive("gains", &self.gains)?;
        positive("budgets", &self.budgets)?;
        positive("moments", &self.moments)?;
        positive("est_vars", &self.est_vars)?;
        if !(self.noise_var >= 0.0 && self.noise_var.is_finite()) {
            return Err(Error::validation("noise variance must be finite and nonnegative"));
        }
        if self.delta.iter().any(|&d| !(d >= 0.0 && d.is_finite())) {
            return Err(Error::validation("delta must be finite and nonnegative"));
        }
        Ok(())
    }

    /// Builds an instance from a channel draw and calibration statistics,
    /// keeping only the first `moments.ncols()` columns of the channel.
    pub fn from_channel(
        channel: &ChannelRealization,
        budgets: &[f64],
        moments: &Array2<f64>,
        est_vars: &Array2<f64>,
        delta: &[f64],
    ) -> Result<Self> {
        let cols = moments.ncols();
        if cols > channel.num_columns() {
            return Err(Error::DimensionMismatch {
                expected: channel.num_columns(),
                got: cols,
            });
        }
        let inst = Self {
            gains: channel.gains.slice(ndarray::s![.., ..cols]).to_owned(),
            budgets: budgets.to_vec(),
            moments: moments.clone(),
            est_vars: est_vars.clone(),
            noise_var: channel.noise_var,
            delta: delta.to_vec(),
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Column `n` as a TDM slot.
    pub fn slot(&self, n: usize) -> TdmInstance {
        TdmInstance {
            gains: self.gains.column(n).to_vec(),
            budgets: self.budgets.clone(),
            moments: self.moments.column(n).to_vec(),
            est_vars: self.est_vars.column(n).to_vec(),
            noise_var: self.noise_var,
            delta: self.delta[n],
        }
    }

    /// Per-device energy `sum_n nu^2 b^2`.
    pub fn power_usage(&self, tx: &Array2<f64>) -> Vec<f64> {
        (0..self.num_devices())
            .map(|k| {
                (0..self.num_subcarriers())
                    .map(|n| self.moments[[k, n]] * tx[[k, n]] * tx[[k, n]])
                    .sum()
            })
            .collect()
    }
}

/// MSE-minimizing receive coefficient for fixed transmit coefficients,
/// `a_n = sum_k c sigma_hat^2 / (sum_k c^2 sigma_hat^2 + sigma_w^2)` with
/// `c = |h b|`. Zero when nothing is received and there is no noise.
pub fn optimal_rx(inst: &FdmInstance, tx: &Array2<f64>) -> Vec<f64> {
    (0..inst.num_subcarriers())
        .map(|n| {
            let (mut num, mut den) = (0.0, inst.noise_var);
            for k in 0..inst.num_devices() {
                let c = inst.gains[[k, n]] * tx[[k, n]];
                num += c * inst.est_vars[[k, n]];
                den += c * c * inst.est_vars[[k, n]];
            }
            if den > 0.0 {
                num / den
            } else {
                0.0
            }
        })
        .collect()
}

/// Total aggregation MSE over the instance's subcarriers.
pub fn mse_objective(inst: &FdmInstance, tx: &Array2<f64>, rx: &[f64]) -> f64 {
    (0..inst.num_subcarriers())
        .map(|n| {
            let a = rx[n];
            let mis: f64 = (0..inst.num_devices())
                .map(|k| {
                    let e = a * inst.gains[[k, n]] * tx[[k, n]] - 1.0;
                    e * e * inst.est_vars[[k, n]]
                })
                .sum();
            mis + a * a * inst.noise_var
        })
        .sum()
}

/// Sum over subcarriers of the received Mahalanobis distance.
pub fn md_objective(inst: &FdmInstance, tx: &Array2<f64>) -> f64 {
    (0..inst.num_subcarriers())
        .map(|n| {
            let (mut s, mut d) = (0.0, inst.noise_var);
            for k in 0..inst.num_devices() {
                let c = inst.gains[[k, n]] * tx[[k, n]];
                s += c;
                d += c * c * inst.est_vars[[k, n]];
            }
            if s > 0.0 {
                inst.delta[n] * s * s / d
            } else {
                0.0
            }
        })
        .sum()
}

/// How the FDM solvers update the power prices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum DualUpdate {
    /// Exact minimization of the dual along one price at a time.
    CoordinateBisection,
    /// Projected subgradient with step `step / sqrt(t)`.
    Subgradient { step: f64 },
}

impl Default for DualUpdate {
    fn default() -> Self {
        DualUpdate::CoordinateBisection
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub eps_lambda: f64,
    pub eps_power: f64,
    pub max_iters: usize,
    /// Target for the reported KKT residual; iteration continues past the
    /// dual stopping rule until it is met or `max_iters` runs out.
    pub kkt_tol: f64,
    pub dual_update: DualUpdate,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            eps_lambda: 1e-6,
            eps_power: 1e-4,
            max_iters: 5000,
            kkt_tol: 1e-6,
            dual_update: DualUpdate::default(),
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_lambda > 0.0 && self.eps_power > 0.0 && self.kkt_tol > 0.0) {
            return Err(Error::validation("solver tolerances must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::validation("max_iters must be at least 1"));
        }
        if let DualUpdate::Subgradient { step } = self.dual_update {
            if !(step > 0.0 && step.is_finite()) {
                return Err(Error::validation("subgradient step must be positive"));
            }
        }
        Ok(())
    }
}

/// Solver-specific certificate attached to a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SolveDetail {
    /// MSE-optimal TDM: the first `k_star` devices of `order` transmit at
    /// full power, the rest invert their channel.
    Threshold { k_star: usize, order: Vec<usize> },
    /// MD-optimal TDM: every `|h b|` is capped at `tau`.
    Tau { tau: f64 },
    /// Final power prices of a dual solver.
    Duals { lambda: Vec<f64> },
    Baseline,
    Oracle { evaluations: usize },
    /// Several independent slots.
    Slots { slots: Vec<SolveDetail> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub design: TransceiverDesign,
    /// Value of the solver's own objective: total MSE or summed MD.
    pub objective: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub detail: SolveDetail,
}

#[derive(Serialize)]
struct ReportDocument<'a> {
    scheme: Scheme,
    objective: f64,
    iterations: usize,
    kkt_residual: f64,
    tx: Vec<Vec<f64>>,
    rx: &'a [f64],
    detail: &'a SolveDetail,
}

impl SolveReport {
    pub fn to_toml(&self) -> String {
        let doc = ReportDocument {
            scheme: self.design.scheme,
            objective: self.objective,
            iterations: self.iterations,
            kkt_residual: self.kkt_residual,
            tx: self.design.tx.rows().into_iter().map(|r| r.to_vec()).collect(),
            rx: &self.design.rx,
            detail: &self.detail,
        };
        toml::to_string(&doc).expect("report fields are plain numbers")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    TdmMse,
    TdmMd,
    FdmMse,
    FdmMd,
    Equal,
    ChannelInversion,
}

impl SolverKind {
    pub const ALL: [SolverKind; 6] = [
        SolverKind::TdmMse,
        SolverKind::TdmMd,
        SolverKind::FdmMse,
        SolverKind::FdmMd,
        SolverKind::Equal,
        SolverKind::ChannelInversion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::TdmMse => "tdm_mse",
            SolverKind::TdmMd => "tdm_md",
            SolverKind::FdmMse => "fdm_mse",
            SolverKind::FdmMd => "fdm_md",
            SolverKind::Equal => "equal",
            SolverKind::ChannelInversion => "channel_inversion",
        }
    }

    pub fn scheme(self) -> Option<Scheme> {
        match self {
            SolverKind::TdmMse | SolverKind::TdmMd => Some(Scheme::Tdm),
            SolverKind::FdmMse | SolverKind::FdmMd => Some(Scheme::Fdm),
            SolverKind::Equal | SolverKind::ChannelInversion => None,
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::validation(format!("unknown solver '{s}'")))
    }
}

/// Solves every column of `inst` as an independent TDM slot and stacks the
/// results into one TDM design. `objective` is the sum over slots.
pub fn solve_tdm_slots(kind: SolverKind, inst: &FdmInstance) -> Result<SolveReport> {
    inst.validate()?;
    let (k, n) = inst.gains.dim();
    let mut tx = Array2::zeros((k, n));
    let mut rx = Vec::with_capacity(n);
    let mut objective = 0.0;
    let mut iterations = 0;
    let mut kkt: f64 = 0.0;
    let mut slots = Vec::with_capacity(n);
    for col in 0..n {
        let slot = inst.slot(col);
        let r = match kind {
            SolverKind::TdmMse => tdm_mse_optimal(&slot)?,
            SolverKind::TdmMd => tdm_md_optimal(&slot)?,
            other => {
                return Err(Error::validation(format!("{other} is not a per-slot TDM solver")));
            }
        };
        tx.column_mut(col).assign(&r.design.tx.column(0));
        rx.push(r.design.rx[0]);
        objective += r.objective;
        iterations += r.iterations;
        kkt = kkt.max(r.kkt_residual);
        slots.push(r.detail);
    }
    Ok(SolveReport {
        design: TransceiverDesign {
            tx,
            rx,
            scheme: Scheme::Tdm,
        },
        objective,
        iterations,
        kkt_residual: kkt,
        detail: SolveDetail::Slots { slots },
    })
}

/// Dispatches any solver on a multi-column instance. TDM solvers treat the
/// columns as slots; the baselines keep `scheme` for the power accounting.
pub fn solve(kind: SolverKind, inst: &FdmInstance, scheme: Scheme, opts: &SolverOptions) -> Result<SolveReport> {
    match kind {
        SolverKind::TdmMse | SolverKind::TdmMd => solve_tdm_slots(kind, inst),
        SolverKind::FdmMse => fdm_mse_dual(inst, opts),
        SolverKind::FdmMd => fdm_md_optimal(inst, opts),
        SolverKind::Equal | SolverKind::ChannelInversion => {
            inst.validate()?;
            let per_slot;
            let source = match scheme {
                Scheme::Fdm => inst,
                // under TDM each slot carries the full budget
                Scheme::Tdm => {
                    per_slot = FdmInstance {
                        budgets: inst
                            .budgets
                            .iter()
                            .map(|p| p * inst.num_subcarriers() as f64)
                            .collect(),
                        ..inst.clone()
                    };
                    &per_slot
                }
            };
            let mut design = if kind == SolverKind::Equal {
                baseline_equal(source)?
            } else {
                baseline_channel_inversion(source)?
            };
            design.scheme = scheme;
            let objective = mse_objective(inst, &design.tx, &design.rx);
            Ok(SolveReport {
                design,
                objective,
                iterations: 0,
                kkt_residual: 0.0,
                detail: SolveDetail::Baseline,
            })
        }
    }
}
