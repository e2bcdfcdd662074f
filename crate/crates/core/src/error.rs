//! Error taxonomy shared by every module.
//!
//! Operations that could in principle loop forever carry explicit caps and
//! convert cap overruns into `NonTermination` or `Numeric` errors, so callers
//! always get a value or an error, never a hang.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or argument is outside the documented domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Parameter set violates a structural invariant (ordering, ranges).
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// Evaluation requested at the singular leaf x = 0 (or within 1e-10 of it).
    #[error("singular leaf: {0}")]
    SingularLeaf(String),

    /// Orbit left the trapping region; integration step too coarse or state bad.
    #[error("blow-up: |state| exceeded {limit:.1e} at step {step}")]
    BlowUp { step: usize, limit: f64 },

    /// Constraint system has no admissible solution.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// The map degenerates (zero derivative scale, collapsed branches).
    #[error("degenerate model: {0}")]
    Degenerate(String),

    /// An iteration cap was reached before the documented terminal condition.
    #[error("no termination within {cap} iterations: {what}")]
    NonTermination { what: String, cap: usize },

    /// Numerical failure: non-finite values, convergence cap exceeded.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A construction stage produced nothing to continue with.
    #[error("construction failed at stage {stage}: {detail}")]
    ConstructionFailed { stage: &'static str, detail: String },

    /// No cylinder or branch survived the filters.
    #[error("empty specification: {0}")]
    EmptySpec(String),

    /// Required precomputed input (e.g. a reference measure) is missing.
    #[error("missing dependency: {0}")]
    MissingDependency(String),

    /// A branch system fails the expansion requirement.
    #[error("not expanding: {0}")]
    NotExpanding(String),

    /// Too few data points for a statistical estimate.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Sampling failed on too many seeds to report a spectrum.
    #[error("sampling failed: {0}")]
    Sampling(String),

    /// The requested mode or input class is not handled.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A declared memory or work budget would be exceeded.
    #[error("resource budget exceeded: {0}")]
    Budget(String),

    /// Malformed serialized input (words, configs, point clouds).
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
