//! Simulation of prior-aided distributed sensing with over-the-air
//! aggregation and MAP classification at the edge server.
//!
//! The chain is: sample a labelled feature from a Gaussian-mixture prior,
//! observe it noisily at every device, estimate it locally, send the
//! estimates over a fading multiple-access channel with designed transmit
//! and receive coefficients, and classify the decoded average.

pub mod aircomp;
pub mod entropy;
pub mod error;
pub mod gm_prior;
pub mod par;
pub mod pipeline;
pub mod rng;
pub mod sensing;
pub mod stats;
pub mod transceiver;

pub use aircomp::{ChannelRealization, Scheme, TransceiverDesign};
pub use error::{Error, Result};
pub use gm_prior::{DiscriminativePrior, GaussianMixturePrior, LabeledFeature};
pub use sensing::{DeviceProfile, EstimatedFeature, EstimatorKind, NoisyObservation};
pub use transceiver::{FdmInstance, SolveReport, SolverKind, SolverOptions, TdmInstance};
