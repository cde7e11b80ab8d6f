//! Out-of-sample evaluation, tradeoff sweeps and error generation.

mod errors;
pub mod profiles;

pub use errors::{persistence_errors, synth_errors, ErrorFamily, PersistenceErrors, SynthSpec, LEPTOKURTIC_NU};
mod scenario;

pub use scenario::DistForecast;
mod montecarlo;

pub use montecarlo::{evaluate_distribution, evaluate_transmission, ErrorSampler, ViolationStats};
mod sweep;

pub use sweep::{distribution_sweep, transmission_sweep, MonteCarlo, SweepRow, SweepTable, SWEEP_SCHEMA};
