//! Error taxonomy shared by every module.
//!
//! Variants map onto the CLI exit codes: configuration and parameter
//! problems exit 2, numeric failures during a run exit 3, and failed
//! experiment verdicts exit 4.

use thiserror::Error;

/// Unified error type for the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameter combination detected before any compute.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Configuration file could not be parsed or failed schema validation.
    #[error("config error: {0}")]
    Config(String),

    /// Two objects that must share a discretization do not.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A sample point falls outside the coverable grid domain.
    #[error("coverage error: {0}")]
    Coverage(String),

    /// Singular kernel evaluated at a coincident pair with no regularization.
    #[error("singularity error: {0}")]
    Singularity(String),

    /// Two particles collided bit-exactly under an unregularized kernel.
    #[error("collision error at step {step}: particles {i} and {j} coincide")]
    Collision { step: usize, i: usize, j: usize },

    /// A state or drift evaluation stopped being finite.
    #[error("overflow error at t={t}: non-finite state for particle {particle}")]
    Overflow { t: f64, particle: usize },

    /// Iterative solver failed to reach its tolerance.
    #[error("nonconvergence: {context} (best bound {best_bound})")]
    NonConvergence { context: String, best_bound: f64 },

    /// Picard iteration stopped contracting.
    #[error("divergence diagnostic: {0}")]
    Divergence(String),

    /// A flow exceeded the configured norm ceiling before the horizon.
    #[error("blow-up diagnostic: {0}")]
    BlowUp(String),

    /// Experiment ran but a criterion failed.
    #[error("acceptance failure: {0}")]
    Acceptance(String),

    /// Filesystem or serialization failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// CLI exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_) | Error::Config(_) | Error::Shape(_) => 2,
            Error::Acceptance(_) => 4,
            _ => 3,
        }
    }
}
