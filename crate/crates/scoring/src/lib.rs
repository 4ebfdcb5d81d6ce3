//! Score computation for build-it/break-it/fix-it contests.
//!
//! Everything here is a pure function of its inputs. Arithmetic is exact
//! ([`Points`] wraps a rational); rounding happens only in
//! [`Points::render`].

mod defects;
mod ledger;
mod limits;
mod model;
mod points;
mod ship;

pub use defects::{
    check_fix_approval, compute_break_scores, compute_resilience, group_finders, resilience_by_target, unify_defects,
};
pub use ledger::{compute_ledgers, performance_ranges, DetailKind, DetailLine, ScoreInputs, ScoreLedger, ShipEvidence};
pub use limits::{enforce_submission_limits, enforce_with, remaining_budget, LimitViolation, SubmissionLimits};
pub use model::{
    BugCategory, BugReport, CorrectnessOutcome, DefectGroup, FixCoverage, FixId, PerformanceOutcome, Problem, ReportId,
    ScoringParams, Severity, TeamId, TestKind,
};
pub use points::Points;
pub use ship::{clamp_measure, compute_ship_score, score_performance_test, RankedPerformance};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ScoreError {
    #[error("negative input to performance scoring")]
    NegativeInput,
    #[error("best measure exceeds worst measure")]
    InvertedRange,
    #[error("measure lies outside [best, worst]")]
    MeasureOutOfRange,
    #[error("duplicate test id {0:?}")]
    DuplicateTest(String),
    #[error("report {report} is covered by approved fixes {first} and {second}")]
    ReportCoveredTwice { report: ReportId, first: FixId, second: FixId },
    #[error("group {group} mixes targets (report {report})")]
    MixedTargets { group: String, report: ReportId },
}
