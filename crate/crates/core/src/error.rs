use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum OqcvError {
    /// Bad input: malformed state spec, infeasible parameter, out-of-contract argument.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// A target mean photon number that the state family cannot reach.
    #[error("infeasible mean photon number {nbar} for {family}: {reason}")]
    Infeasible {
        family: String,
        nbar: f64,
        reason: String,
    },

    /// The state has no regular non-negative P function.
    #[error("state {0} has no regular non-negative P function")]
    NotRepresentable(String),

    /// A density failed its normalization check.
    #[error("density integrates to {integral} (expected 1 within {tolerance})")]
    Normalization { integral: f64, tolerance: f64 },

    /// Quadrature refinement hit its node cap without meeting the tolerance.
    #[error(
        "not converged after {nodes} nodes per axis: last estimate {last}, previous {previous} \
         (error {error:.3e} > tolerance {tolerance:.3e})"
    )]
    NotConverged {
        last: f64,
        previous: f64,
        error: f64,
        tolerance: f64,
        nodes: usize,
    },

    /// Rejection sampler acceptance fell below the efficiency floor.
    #[error("rejection sampler acceptance {acceptance:.3e} below floor after {proposals} proposals")]
    SamplerEfficiency { acceptance: f64, proposals: u64 },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl OqcvError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        OqcvError::Invalid(msg.into())
    }

    /// Whether the error is a numerical non-convergence (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            OqcvError::NotConverged { .. } | OqcvError::SamplerEfficiency { .. }
        )
    }
}

impl From<std::io::Error> for OqcvError {
    fn from(e: std::io::Error) -> Self {
        OqcvError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for OqcvError {
    fn from(e: serde_json::Error) -> Self {
        OqcvError::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, OqcvError>;
