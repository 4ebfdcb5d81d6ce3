use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::points::Points;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    Securelog,
    Atm,
    Ehr,
}

impl Problem {
    pub fn as_str(&self) -> &'static str {
        match self {
            Problem::Securelog => "securelog",
            Problem::Atm => "atm",
            Problem::Ehr => "ehr",
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Problem {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "securelog" => Ok(Problem::Securelog),
            "atm" => Ok(Problem::Atm),
            "ehr" => Ok(Problem::Ehr),
            other => Err(format!("unknown problem {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TeamId(pub String);

impl fmt::Display for TeamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TeamId {
    fn from(s: &str) -> Self {
        TeamId(s.to_owned())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReportId(pub u64);

impl fmt::Display for ReportId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FixId(pub u64);

impl fmt::Display for FixId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}", self.0)
    }
}

/// Contest-wide scoring constants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoringParams {
    /// The constant multiplier `M`.
    pub multiplier: i64,
    pub problem: Problem,
}

impl ScoringParams {
    pub const DEFAULT_MULTIPLIER: i64 = 50;

    pub fn new(problem: Problem) -> Self {
        ScoringParams { multiplier: Self::DEFAULT_MULTIPLIER, problem }
    }

    pub fn m(&self) -> Points {
        Points::from_integer(self.multiplier)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    Mandatory,
    Optional,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectnessOutcome {
    pub test_id: String,
    pub kind: TestKind,
    pub passed: bool,
}

/// A performance measurement; lower is better.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerformanceOutcome {
    pub test_id: String,
    pub measure: Points,
    pub unit: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BugCategory {
    Correctness,
    Crash,
    Privacy,
    Integrity,
    Availability,
}

impl BugCategory {
    pub const ALL: [BugCategory; 5] =
        [BugCategory::Correctness, BugCategory::Crash, BugCategory::Privacy, BugCategory::Integrity, BugCategory::Availability];

    pub fn severity(&self) -> Severity {
        match self {
            BugCategory::Correctness => Severity::Correctness,
            BugCategory::Crash => Severity::Crash,
            BugCategory::Privacy | BugCategory::Integrity | BugCategory::Availability => Severity::Security,
        }
    }

    pub fn is_security(&self) -> bool {
        self.severity() == Severity::Security
    }
}

impl fmt::Display for BugCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BugCategory::Correctness => "correctness",
            BugCategory::Crash => "crash",
            BugCategory::Privacy => "privacy",
            BugCategory::Integrity => "integrity",
            BugCategory::Availability => "availability",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for BugCategory {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BugCategory::ALL.into_iter().find(|c| c.to_string() == s).ok_or_else(|| format!("unknown category {s:?}"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugReport {
    pub id: ReportId,
    pub breaker: TeamId,
    pub target: TeamId,
    pub category: BugCategory,
    pub accepted: bool,
    /// Opaque handle to the judged test artifact.
    pub evidence: String,
}

/// Ordered so that `max` picks the costliest class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Correctness,
    Crash,
    Security,
}

impl Severity {
    /// `P` for a unique defect of this severity.
    pub fn value(&self, params: &ScoringParams) -> Points {
        let m = params.m();
        match self {
            Severity::Correctness => m / 2,
            Severity::Crash => m,
            Severity::Security => m * 2,
        }
    }
}

/// What the scoring engine needs to know about a fix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixCoverage {
    pub id: FixId,
    pub covered: BTreeSet<ReportId>,
    pub approved: bool,
}

/// The deduplication unit: accepted reports unified by one approved fix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefectGroup {
    pub id: String,
    pub target: TeamId,
    pub reports: BTreeSet<ReportId>,
    pub severity: Severity,
    pub points: Points,
}
