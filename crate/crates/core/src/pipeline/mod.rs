//! Monte Carlo experiment runner: configuration, calibration, trials,
//! sweeps, CSV export and the subcommand drivers.

pub mod calibration;
pub mod config;
pub mod experiments;
pub mod export;
pub mod sweep;
pub mod trial;

pub use config::{DecodeScaling, ExperimentConfig, SigmaHatSource, SweepSpec, SweepVariable};
pub use sweep::{run_sweep, MetricsRecord, SweepResult};
pub use trial::{run_trial, Scenario, TrialRecord};
