use serde::{Deserialize, Serialize};

use crate::model::{BugCategory, BugReport, Problem};

/// Per-target caps on what one breaker may have recorded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmissionLimits {
    pub per_target: usize,
    /// Cap on privacy and on integrity reports, each; `None` means uncapped.
    pub per_security_category: Option<usize>,
}

impl SubmissionLimits {
    pub fn for_problem(problem: Problem) -> Self {
        match problem {
            Problem::Securelog | Problem::Atm => SubmissionLimits { per_target: 10, per_security_category: Some(1) },
            Problem::Ehr => SubmissionLimits { per_target: 5, per_security_category: None },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "limit", rename_all = "kebab-case")]
pub enum LimitViolation {
    #[error("per-target report cap of {cap} reached")]
    TotalCap { cap: usize },
    #[error("per-target cap of {cap} {category} report(s) reached")]
    CategoryCap { category: BugCategory, cap: usize },
}

/// Decides whether `new` may be recorded given this breaker's prior reports
/// against the same target. Only accepted prior reports count.
pub fn enforce_submission_limits(problem: Problem, prior: &[BugReport], new: &BugReport) -> Result<(), LimitViolation> {
    enforce_with(SubmissionLimits::for_problem(problem), prior, new)
}

pub fn enforce_with(limits: SubmissionLimits, prior: &[BugReport], new: &BugReport) -> Result<(), LimitViolation> {
    let counted = prior
        .iter()
        .filter(|r| r.accepted && r.breaker == new.breaker && r.target == new.target && r.id != new.id);
    let mut total = 0;
    let mut same_category = 0;
    for r in counted {
        total += 1;
        if r.category == new.category {
            same_category += 1;
        }
    }
    if total >= limits.per_target {
        return Err(LimitViolation::TotalCap { cap: limits.per_target });
    }
    if let Some(cap) = limits.per_security_category {
        if matches!(new.category, BugCategory::Privacy | BugCategory::Integrity) && same_category >= cap {
            return Err(LimitViolation::CategoryCap { category: new.category, cap });
        }
    }
    Ok(())
}

/// Reports this breaker can still record against the target.
pub fn remaining_budget(problem: Problem, prior: &[BugReport], breaker: &crate::TeamId, target: &crate::TeamId) -> usize {
    let limits = SubmissionLimits::for_problem(problem);
    let used = prior.iter().filter(|r| r.accepted && &r.breaker == breaker && &r.target == target).count();
    limits.per_target.saturating_sub(used)
}
