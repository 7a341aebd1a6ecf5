//! Scenario definitions, seeded Monte-Carlo runs, sweeps over the number of
//! measurements and the noise level, and the CSV files they produce.

pub mod io;
mod run;
mod scenario;
mod spectrum;

pub use run::{
    normalized_errors, reconstruction_error, run_scenario, run_seed, sweep_measurements, sweep_noise,
    PointResult, RunOptions, RunOutcome, RunRecord, Setup, SweepResult, Trial,
};
pub use scenario::{build_truth, Measurements, Obstruction, Scenario};
pub use spectrum::{spectrum_report, SpectrumReport};
