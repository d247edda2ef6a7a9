//! Reference allocations used for comparison.

use super::{optimal_rx, FdmInstance};
use crate::aircomp::{Scheme, TransceiverDesign};
use crate::error::Result;

fn equal_split(inst: &FdmInstance, k: usize, n: usize) -> f64 {
    (inst.budgets[k] / (inst.num_subcarriers() as f64 * inst.moments[[k, n]])).sqrt()
}

/// Every device spreads its budget evenly over the subcarriers.
pub fn baseline_equal(inst: &FdmInstance) -> Result<TransceiverDesign> {
    inst.validate()?;
    let tx = ndarray::Array2::from_shape_fn(inst.gains.dim(), |(k, n)| equal_split(inst, k, n));
    let rx = optimal_rx(inst, &tx);
    Ok(TransceiverDesign {
        tx,
        rx,
        scheme: Scheme::Fdm,
    })
}

/// Channel inversion capped at the even split.
pub fn baseline_channel_inversion(inst: &FdmInstance) -> Result<TransceiverDesign> {
    inst.validate()?;
    let tx = ndarray::Array2::from_shape_fn(inst.gains.dim(), |(k, n)| {
        equal_split(inst, k, n).min(1.0 / inst.gains[[k, n]])
    });
    let rx = optimal_rx(inst, &tx);
    Ok(TransceiverDesign {
        tx,
        rx,
        scheme: Scheme::Fdm,
    })
}
