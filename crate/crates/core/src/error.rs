use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A document or constructed object violates a structural invariant.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("parse error: {0}")]
    Parse(String),

    /// An enumeration would exceed a configured limit.
    #[error("resource limit exceeded: {what} needs {requested}, limit is {limit}")]
    Resource {
        what: &'static str,
        requested: u128,
        limit: u128,
    },

    /// A closure step that the object tier cannot represent.
    #[error("unsupported step {step} on {tier} tier")]
    UnsupportedStep { step: String, tier: &'static str },

    /// A detector that needs a richer representation than it was given.
    #[error("detector {mechanism} needs a slice, got a {tier}")]
    UnsupportedDetector { mechanism: String, tier: &'static str },

    /// A brute-force cross-check disagreed with a proved invariance.
    /// Unreachable unless the implementation is wrong.
    #[error("theory violation: {0}")]
    TheoryViolation(String),

    /// A replayable artifact failed one of its invariants.
    #[error("verification failed: {0}")]
    Verification(String),

    /// An error raised while applying step `index` of a trace.
    #[error("step {index}: {source}")]
    Step { index: usize, source: Box<Error> },
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_)
            | Error::Validation(_)
            | Error::Parse(_)
            | Error::UnsupportedStep { .. }
            | Error::UnsupportedDetector { .. } => 1,
            Error::Resource { .. } => 2,
            Error::TheoryViolation(_) => 3,
            Error::Verification(_) => 4,
            Error::Step { source, .. } => source.exit_code(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
