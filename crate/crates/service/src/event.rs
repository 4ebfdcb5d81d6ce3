use bibifi_judge::{Adjudication, BreakSubmission, Fix, FixDecision, FixState, Precheck};
use bibifi_scoring::{BugReport, FixId, ReportId, ShipEvidence, TeamId};
use serde::{Deserialize, Serialize};

use crate::config::Phase;

/// One line of the event log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    /// Unix seconds.
    pub at: u64,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "kebab-case")]
pub enum Event {
    Team(TeamRegistered),
    Submission(SubmissionRecorded),
    TestResult(TestResult),
    Break(BreakRecorded),
    Fix(FixRecorded),
    PhaseChange(PhaseChange),
    JudgeDecision(JudgeDecision),
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::Team(_) => "team",
            Event::Submission(_) => "submission",
            Event::TestResult(_) => "test-result",
            Event::Break(_) => "break",
            Event::Fix(_) => "fix",
            Event::PhaseChange(_) => "phase-change",
            Event::JudgeDecision(_) => "judge-decision",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeamRegistered {
    pub team: TeamId,
    pub members: Vec<String>,
    pub token_hash: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmissionRecorded {
    pub id: u64,
    pub team: TeamId,
    pub language: Option<String>,
    pub archive_sha256: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestResult {
    pub submission: u64,
    pub evidence: ShipEvidence,
    pub build_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BreakRecorded {
    pub id: ReportId,
    pub target_submission: u64,
    pub submission: BreakSubmission,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixRecorded {
    pub fix: Fix,
    pub archive_sha256: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseChange {
    pub phase: Phase,
    /// "schedule" or the admin.
    pub by: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "subject", rename_all = "kebab-case")]
pub enum JudgeDecision {
    Break { report: ReportId, outcome: Adjudication, recorded: Option<BugReport> },
    FixPrecheck { fix: FixId, precheck: Precheck, state: FixState },
    FixReview { fix: FixId, decision: FixDecision, state: FixState },
}
