//! Break adjudication against the oracle, the oracle-bug queue, and fix
//! validation.

pub mod adjudicate;
pub mod fix;
pub mod payload;

pub use adjudicate::{adjudicate_crash, adjudicate_script, Adjudication, Decision, Judge, OracleBug, TargetBuild};
pub use fix::{coverage, precheck_fix, validate_fix, Fix, FixDecision, FixState, Precheck};
pub use payload::{programs_script, BreakSubmission, Payload};

use bibifi_runner::RunnerError;

#[derive(Debug, thiserror::Error)]
pub enum JudgeError {
    #[error(transparent)]
    Runner(#[from] RunnerError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    /// The target misbehaved in a way that defeats the test.
    #[error("{0}")]
    Target(String),
    #[error("oracle fault: {0}")]
    Oracle(String),
    #[error("invalid payload: {0}")]
    Invalid(String),
}
