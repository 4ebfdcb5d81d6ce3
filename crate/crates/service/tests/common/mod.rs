#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use bibifi_judge::{Adjudication, BreakSubmission, Decision, Fix, OracleBug, Payload, Precheck};
use bibifi_scoring::{
    enforce_with, BugReport, CorrectnessOutcome, PerformanceOutcome, Points, Problem, ReportId, ShipEvidence,
    SubmissionLimits, TeamId, TestKind,
};
use bibifi_service::*;
use serde::{Deserialize, Serialize};

pub const ADMIN: &str = "admin-token-for-tests";

/// What a fake bundle asks the backend to report.
#[derive(Serialize, Deserialize)]
pub struct Spec {
    pub qualified: bool,
    pub perf: i64,
}

/// Decides by reading the bundle and payload instead of running anything.
/// A programs payload `["accept:privacy"]` is accepted as privacy; anything
/// else is rejected. A fix bundle with a `precheck` file saying `pass` passes.
pub struct FakeBackend {
    pub limits: SubmissionLimits,
}

impl Backend for FakeBackend {
    fn evaluate(&self, team: &TeamId, _submission: u64, bundle: &Path) -> Result<Evaluated, String> {
        let spec: Spec = serde_json::from_slice(&std::fs::read(bundle.join("spec.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let evidence = ShipEvidence {
            team: team.clone(),
            qualified: spec.qualified,
            correctness: vec![
                CorrectnessOutcome { test_id: "m1".into(), kind: TestKind::Mandatory, passed: spec.qualified },
                CorrectnessOutcome { test_id: "o1".into(), kind: TestKind::Optional, passed: true },
            ],
            performance: vec![PerformanceOutcome { test_id: "p1".into(), measure: Points::from_integer(spec.perf), unit: "ms".into() }],
        };
        Ok(Evaluated { evidence, build_ok: true })
    }

    fn challenges(&self, _submission: u64) -> Vec<PublicChallenge> {
        vec![]
    }

    fn adjudicate(&self, sub: &BreakSubmission, _t: u64, prior: &[BugReport], id: ReportId) -> Result<Decision, String> {
        let verdict = match &sub.payload {
            Payload::Programs { programs, .. } => programs.first().cloned().unwrap_or_default(),
            _ => String::new(),
        };
        let Some(category) = verdict.strip_prefix("accept:") else {
            return Ok(Decision { outcome: Adjudication::Rejected { reason: "no".into() }, report: None });
        };
        let category = category.parse().map_err(|e: String| e)?;
        let report = BugReport { id, breaker: sub.breaker.clone(), target: sub.target.clone(), category, accepted: true, evidence: verdict.clone() };
        Ok(match enforce_with(self.limits, prior, &report) {
            Ok(()) => Decision { outcome: Adjudication::Accepted { category, evidence: verdict }, report: Some(report) },
            Err(violation) => Decision { outcome: Adjudication::Limit { violation }, report: None },
        })
    }

    fn precheck(&self, _fix: &Fix, bundle: &Path, _o: u64, _r: &[BugReport], _s: &[(ReportId, BreakSubmission)]) -> Result<Precheck, String> {
        let pass = std::fs::read_to_string(bundle.join("precheck")).is_ok_and(|s| s.trim() == "pass");
        Ok(Precheck { builds: true, failing_mandatory: if pass { vec![] } else { vec!["m1".into()] }, ..Precheck::default() })
    }

    fn oracle_bugs(&self) -> Vec<OracleBug> {
        vec![]
    }
}

pub fn archive(files: &[(&str, &str)]) -> Vec<u8> {
    let dir = tempfile::tempdir().unwrap();
    for (name, body) in files {
        std::fs::write(dir.path().join(name), body).unwrap();
    }
    bibifi_runner::archive::pack_dir(dir.path()).unwrap()
}

pub fn bundle(qualified: bool, perf: i64) -> Vec<u8> {
    archive(&[("spec.json", &serde_json::to_string(&Spec { qualified, perf }).unwrap())])
}

pub fn fake_contest(dir: &Path, config: ContestConfig, clock: Arc<ManualClock>) -> Arc<Contest> {
    let backend = FakeBackend { limits: config.limits() };
    Contest::open(config, dir, Arc::new(backend), clock, ADMIN).unwrap()
}

pub fn idle(c: &Contest) {
    assert!(c.wait_idle(Duration::from_secs(60)), "background jobs did not finish");
}

pub fn programs(verdict: &str) -> Payload {
    Payload::Programs { admin_password: None, programs: vec![verdict.into()] }
}

pub fn ehr() -> ContestConfig {
    ContestConfig::new(Problem::Ehr)
}
