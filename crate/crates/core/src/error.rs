use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors surfaced by the mitigation toolkit.
///
/// [`Error::is_resource`] separates resource exhaustion from contract
/// violations; the command-line front end maps them to different exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Binary data was combined with an analog model, or the reverse.
    #[error("mode mismatch: {context} is {found}, expected {expected}")]
    ModeMismatch {
        context: &'static str,
        expected: crate::Mode,
        found: crate::Mode,
    },

    /// Calibration samples span no range, so no bins can be laid out.
    #[error("degenerate calibration: {0}")]
    DegenerateCalibration(String),

    /// Every candidate string assigns zero likelihood to an observed outcome.
    #[error("degenerate likelihood for observed outcome {outcome}")]
    DegenerateLikelihood { outcome: String },

    #[error("confusion matrix of qubit {qubit} is singular (|det| = {det:e})")]
    Singular { qubit: usize, det: f64 },

    /// The likelihood cache would exceed the configured budget.
    #[error("likelihood cache of {groups} outcome groups x {strings} strings exceeds the budget of {budget} entries")]
    Resource {
        groups: usize,
        strings: usize,
        budget: usize,
    },

    /// Cached totals drifted below zero; indicates a bookkeeping bug.
    #[error("internal consistency: {0}")]
    InternalConsistency(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn is_resource(&self) -> bool {
        matches!(self, Error::Resource { .. })
    }

    /// Short machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Contract(_) => "contract",
            Error::ModeMismatch { .. } => "mode_mismatch",
            Error::DegenerateCalibration(_) => "degenerate_calibration",
            Error::DegenerateLikelihood { .. } => "degenerate_likelihood",
            Error::Singular { .. } => "singular",
            Error::Resource { .. } => "resource",
            Error::InternalConsistency(_) => "internal_consistency",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
