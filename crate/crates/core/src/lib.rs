//! Readout-error mitigation for qubit registers.
//!
//! The crate estimates the true distribution of prepared basis strings from
//! noisy measurement outcomes. Detector noise is a tensor product of
//! per-qubit models, either 2x2 confusion matrices ([`Mode::Binary`]) or
//! binned response functions of the raw readout signal ([`Mode::Analog`]).
//! [`mitigate`] runs pairwise Bayesian sweeps on the set of observed strings;
//! [`baselines`] holds iterative unfolding and matrix inversion for
//! comparison, and [`simulator`] produces Gaussian readout with known truth.
//!
//! ```
//! use qmit::{mitigate, MitigationConfig, NoiseModel, OutcomeTally, SingleQubitConfusion};
//!
//! let model = NoiseModel::binary(vec![SingleQubitConfusion::symmetric(0.9).unwrap()]);
//! let tally = OutcomeTally::from_bit_counts([
//!     ("0".parse().unwrap(), 580),
//!     ("1".parse().unwrap(), 420),
//! ])
//! .unwrap();
//! let result = mitigate(&tally, &model, &MitigationConfig::default()).unwrap();
//! let p0 = result.population(&"0".parse().unwrap());
//! assert!((p0 - 0.6).abs() <= 0.01);
//! ```

pub mod baselines;
pub mod bayes;
pub mod bits;
pub mod calibration;
pub mod error;
pub mod metrics;
pub mod noise_model;
pub mod simulator;
pub mod tally;

pub use bayes::{
    brute_force_posterior, estimate_pair, mitigate, pair_log_posterior, sweep, sweep_observed, Estimator, MitigationConfig,
    MitigationResult, MitigationState, PairPosterior, ResultFile,
};
pub use bits::{BitString, OutcomeKey};
pub use calibration::{calibrate_analog, calibrate_binary, calibrate_model, CalibrationRecord, Samples};
pub use error::{Error, Result};
pub use metrics::{total_variation, ConvergenceTrace, TraceEntry};
pub use noise_model::{Detectors, Mode, NoiseModel, ResponseFunction, SingleQubitConfusion};
pub use tally::{tally_shots, OutcomeTally, Shot};

// Guide chapters, compiled and run as doctests.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/noise-model.md")]
    mod noise_model {}
    #[doc = include_str!("../../../book/src/calibration.md")]
    mod calibration {}
    #[doc = include_str!("../../../book/src/tallies.md")]
    mod tallies {}
    #[doc = include_str!("../../../book/src/pairwise-bayes.md")]
    mod pairwise_bayes {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/simulator.md")]
    mod simulator {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
