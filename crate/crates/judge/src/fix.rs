//! Fix validation: mechanical prechecks, then a recorded human decision on
//! whether the fix is atomic.

use std::collections::BTreeSet;

use bibifi_runner::{run_test, ProblemDescriptor};
use bibifi_scoring::{check_fix_approval, BugReport, FixCoverage, FixId, ReportId, TeamId};
use serde::{Deserialize, Serialize};

use crate::adjudicate::{Judge, TargetBuild};
use crate::payload::BreakSubmission;
use crate::JudgeError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "kebab-case")]
pub enum FixState {
    Pending,
    Approved { judge: String, at: u64, rationale: String },
    /// `judge` is absent when a precheck rejected the fix.
    Rejected { reason: String, judge: Option<String>, at: Option<u64> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fix {
    pub id: FixId,
    pub builder: TeamId,
    pub covered: BTreeSet<ReportId>,
    pub diff_ref: String,
    pub state: FixState,
}

/// A judge's atomicity ruling.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixDecision {
    pub approve: bool,
    pub judge: String,
    pub at: u64,
    pub rationale: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Precheck {
    pub builds: bool,
    pub failing_mandatory: Vec<String>,
    /// Covered reports whose payload is still accepted against the fixed build.
    pub still_breaking: Vec<ReportId>,
    /// Covered reports that are unknown, unaccepted, or against another team.
    pub foreign: Vec<ReportId>,
}

impl Precheck {
    pub fn passed(&self) -> bool {
        self.builds && self.failing_mandatory.is_empty() && self.still_breaking.is_empty() && self.foreign.is_empty()
    }

    pub fn reason(&self) -> Option<String> {
        if !self.builds {
            return Some("fixed build failed".into());
        }
        if !self.foreign.is_empty() {
            return Some(format!("covers reports not accepted against the builder: {:?}", self.foreign));
        }
        if !self.failing_mandatory.is_empty() {
            return Some(format!("fails mandatory tests: {}", self.failing_mandatory.join(", ")));
        }
        if !self.still_breaking.is_empty() {
            return Some(format!("covered payloads still break the fixed build: {:?}", self.still_breaking));
        }
        None
    }
}

fn foreign(fix: &Fix, reports: &[BugReport]) -> Vec<ReportId> {
    fix.covered
        .iter()
        .filter(|id| !reports.iter().any(|r| r.id == **id && r.accepted && r.target == fix.builder))
        .copied()
        .collect()
}

/// Runs the mechanical prechecks. `fixed` is `None` when the fixed code did
/// not build; `submissions` maps covered reports to their original payloads.
pub fn precheck_fix(
    judge: &Judge,
    problem: &ProblemDescriptor,
    fix: &Fix,
    fixed: Option<&TargetBuild>,
    reports: &[BugReport],
    submissions: &[(ReportId, BreakSubmission)],
) -> Result<Precheck, JudgeError> {
    let mut p = Precheck { foreign: foreign(fix, reports), ..Precheck::default() };
    let Some(build) = fixed else { return Ok(p) };
    p.builds = true;
    for t in problem.mandatory() {
        if !run_test(&build.artifacts, t, judge.provider.as_ref(), problem.loopback)?.passed {
            p.failing_mandatory.push(t.id.clone());
        }
    }
    for (id, sub) in submissions.iter().filter(|(id, _)| fix.covered.contains(id)) {
        let d = judge.adjudicate(sub, build, &[], *id)?;
        if d.outcome.is_accepted() {
            p.still_breaking.push(*id);
        }
    }
    Ok(p)
}

/// The fix's next state. Failed prechecks reject without review; otherwise
/// the fix waits for a decision, and approval must not reuse a report
/// already covered by another approved fix.
pub fn validate_fix(
    fix: &Fix,
    reports: &[BugReport],
    precheck: &Precheck,
    approved: &[FixCoverage],
    decision: Option<&FixDecision>,
) -> FixState {
    let mut precheck = precheck.clone();
    precheck.foreign = foreign(fix, reports);
    if let Some(reason) = precheck.reason() {
        return FixState::Rejected { reason, judge: None, at: None };
    }
    let Some(d) = decision else { return FixState::Pending };
    if d.judge.trim().is_empty() {
        return FixState::Pending;
    }
    if !d.approve {
        return FixState::Rejected { reason: d.rationale.clone(), judge: Some(d.judge.clone()), at: Some(d.at) };
    }
    let candidate = FixCoverage { id: fix.id, covered: fix.covered.clone(), approved: true };
    match check_fix_approval(approved, &candidate) {
        Ok(()) => FixState::Approved { judge: d.judge.clone(), at: d.at, rationale: d.rationale.clone() },
        Err(e) => FixState::Rejected { reason: e.to_string(), judge: Some(d.judge.clone()), at: Some(d.at) },
    }
}

pub fn coverage(fix: &Fix) -> FixCoverage {
    FixCoverage { id: fix.id, covered: fix.covered.clone(), approved: matches!(fix.state, FixState::Approved { .. }) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use bibifi_scoring::BugCategory;

    fn report(id: u64, target: &str) -> BugReport {
        BugReport {
            id: ReportId(id),
            breaker: TeamId("b".into()),
            target: TeamId(target.into()),
            category: BugCategory::Correctness,
            accepted: true,
            evidence: String::new(),
        }
    }

    fn fix(covered: &[u64]) -> Fix {
        Fix {
            id: FixId(1),
            builder: TeamId("t".into()),
            covered: covered.iter().map(|i| ReportId(*i)).collect(),
            diff_ref: "abc".into(),
            state: FixState::Pending,
        }
    }

    fn ok() -> Precheck {
        Precheck { builds: true, ..Precheck::default() }
    }

    fn decision(approve: bool) -> FixDecision {
        FixDecision { approve, judge: "j".into(), at: 7, rationale: "one defect".into() }
    }

    #[test]
    fn prechecks_gate_review() {
        let reports = [report(1, "t"), report(2, "other")];
        let bad = Precheck { failing_mandatory: vec!["m".into()], ..ok() };
        assert!(matches!(validate_fix(&fix(&[1]), &reports, &bad, &[], Some(&decision(true))), FixState::Rejected { judge: None, .. }));
        assert!(matches!(validate_fix(&fix(&[1, 2]), &reports, &ok(), &[], Some(&decision(true))), FixState::Rejected { judge: None, .. }));
        assert_eq!(validate_fix(&fix(&[1]), &reports, &ok(), &[], None), FixState::Pending);
        assert!(matches!(validate_fix(&fix(&[1]), &reports, &ok(), &[], Some(&decision(true))), FixState::Approved { at: 7, .. }));
        assert!(matches!(validate_fix(&fix(&[1]), &reports, &ok(), &[], Some(&decision(false))), FixState::Rejected { judge: Some(_), .. }));
    }

    #[test]
    fn approval_needs_a_judge_identity() {
        let mut d = decision(true);
        d.judge = " ".into();
        assert_eq!(validate_fix(&fix(&[1]), &[report(1, "t")], &ok(), &[], Some(&d)), FixState::Pending);
    }

    #[test]
    fn second_approval_of_a_report_is_rejected() {
        let prior = FixCoverage { id: FixId(9), covered: BTreeSet::from([ReportId(1)]), approved: true };
        let s = validate_fix(&fix(&[1]), &[report(1, "t")], &ok(), &[prior], Some(&decision(true)));
        assert!(matches!(s, FixState::Rejected { judge: Some(_), .. }), "{s:?}");
    }
}
