//! Monte Carlo experiments: scene sampling, trials, sweeps with CSV output,
//! worked-example regression and noise-floor calibration.

pub mod calibrate;
pub mod config;
pub mod repro;
pub mod sweep;
pub mod trial;

pub use calibrate::{calibrate, Calibration};
pub use config::{ExperimentConfig, Method, MethodSelector, TrialPoint};
pub use repro::{repro_examples, ReproReport};
pub use sweep::{run_sweep, sweep_to_path, write_csv, PointResults};
pub use trial::{run_trial, simulate_trial, trial_seed, TrialResult};
