//! Where builds, tests and adjudication actually run. The service only sees
//! this trait, so contest logic can be exercised without sandboxes.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use bibifi_judge::{precheck_fix, BreakSubmission, Decision, Fix, Judge, OracleBug, Precheck, TargetBuild};
use bibifi_runner::artifacts::copy_tree;
use bibifi_runner::evaluate::DEFAULT_PARALLELISM;
use bibifi_runner::{evaluate_artifacts, run_build, Artifacts, IsolationProvider, ProblemDescriptor, Session};
use bibifi_scoring::{BugReport, Problem, ReportId, ShipEvidence, TeamId};
use bibifi_securelog::{generate_challenge_logs, Challenge};
use serde::{Deserialize, Serialize};

use crate::config::ContestConfig;

/// A challenge log as breakers see it: no token, and a transcript only for
/// integrity challenges.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicChallenge {
    pub index: usize,
    pub log_name: String,
    pub log: String,
    pub transcript: Option<Vec<Vec<String>>>,
}

impl PublicChallenge {
    pub fn of(index: usize, c: &Challenge) -> Self {
        PublicChallenge { index, log_name: c.log_name.clone(), log: hex::encode(&c.log), transcript: c.public_transcript() }
    }
}

pub struct Evaluated {
    pub evidence: ShipEvidence,
    pub build_ok: bool,
}

pub trait Backend: Send + Sync {
    fn evaluate(&self, team: &TeamId, submission: u64, bundle: &Path) -> Result<Evaluated, String>;
    fn challenges(&self, submission: u64) -> Vec<PublicChallenge>;
    fn adjudicate(&self, sub: &BreakSubmission, target_submission: u64, prior: &[BugReport], id: ReportId) -> Result<Decision, String>;
    /// `original` is the submission the covered reports were judged against.
    fn precheck(
        &self,
        fix: &Fix,
        bundle: &Path,
        original: u64,
        reports: &[BugReport],
        submissions: &[(ReportId, BreakSubmission)],
    ) -> Result<Precheck, String>;
    fn oracle_bugs(&self) -> Vec<OracleBug>;
}

/// Builds and judges in sandboxes. Built artifacts and challenge logs are
/// kept under `work/builds/<submission>`.
pub struct RunnerBackend {
    pub descriptor: ProblemDescriptor,
    pub judge: Judge,
    pub work: PathBuf,
    pub challenges: usize,
    pub seed: u64,
}

pub fn descriptor_for(problem: Problem) -> ProblemDescriptor {
    match problem {
        Problem::Securelog => bibifi_securelog::problem::descriptor(),
        Problem::Atm => bibifi_atm::problem::descriptor(),
        Problem::Ehr => bibifi_ehr::problem::descriptor(),
    }
}

const CHALLENGES: &str = "challenges.json";

impl RunnerBackend {
    /// `oracle` holds the built reference executables.
    pub fn new(
        config: &ContestConfig,
        descriptor: ProblemDescriptor,
        provider: Arc<dyn IsolationProvider>,
        oracle: &Path,
        work: &Path,
    ) -> Result<Self, String> {
        descriptor.validate().map_err(|e| e.to_string())?;
        let oracle = Artifacts::from_dir(oracle, &descriptor.artifacts).map_err(|e| format!("oracle: {e}"))?;
        let judge = Judge::new(config.problem, provider, oracle, descriptor.loopback).with_limits(config.limits());
        Ok(RunnerBackend { descriptor, judge, work: work.to_path_buf(), challenges: config.challenges, seed: config.seed })
    }

    fn build_dir(&self, submission: u64) -> PathBuf {
        self.work.join("builds").join(submission.to_string())
    }

    fn load_challenges(&self, submission: u64) -> Vec<Challenge> {
        std::fs::read(self.build_dir(submission).join(CHALLENGES))
            .ok()
            .and_then(|b| serde_json::from_slice(&b).ok())
            .unwrap_or_default()
    }

    fn target(&self, team: &TeamId, submission: u64) -> Result<TargetBuild, String> {
        let artifacts =
            Artifacts::from_dir(self.build_dir(submission).join("bin"), &self.descriptor.artifacts).map_err(|e| e.to_string())?;
        Ok(TargetBuild { team: team.clone(), artifacts, challenges: self.load_challenges(submission) })
    }

    fn provider(&self) -> &dyn IsolationProvider {
        self.judge.provider.as_ref()
    }

    fn build(&self, bundle: &Path, into: &Path) -> Result<Option<Artifacts>, String> {
        let built = run_build(bundle, &self.descriptor.artifacts, self.provider()).map_err(|e| e.to_string())?;
        let Ok(artifacts) = built.outcome else {
            log::info!("build failed: {}", built.log);
            return Ok(None);
        };
        let bin = into.join("bin");
        std::fs::create_dir_all(&bin).map_err(|e| e.to_string())?;
        copy_tree(artifacts.dir(), &bin).map_err(|e| e.to_string())?;
        Artifacts::from_dir(bin, &self.descriptor.artifacts).map(Some).map_err(|e| e.to_string())
    }
}

impl Backend for RunnerBackend {
    fn evaluate(&self, team: &TeamId, submission: u64, bundle: &Path) -> Result<Evaluated, String> {
        let dir = self.build_dir(submission);
        let Some(artifacts) = self.build(bundle, &dir)? else {
            let evidence = ShipEvidence { team: team.clone(), qualified: false, correctness: vec![], performance: vec![] };
            return Ok(Evaluated { evidence, build_ok: false });
        };
        let eval = evaluate_artifacts(&artifacts, &self.descriptor, self.provider(), DEFAULT_PARALLELISM).map_err(|e| e.to_string())?;
        let evidence = eval.ship_evidence(team.clone(), &self.descriptor);
        if self.descriptor.problem == Problem::Securelog && evidence.qualified {
            let session = Session::open(self.judge.provider.clone(), artifacts).map_err(|e| e.to_string())?;
            let challenges = generate_challenge_logs(&session, self.seed ^ submission, self.challenges).unwrap_or_else(|e| {
                log::warn!("submission {submission}: no challenge logs: {e}");
                vec![]
            });
            let body = serde_json::to_vec(&challenges).expect("challenges serialize");
            std::fs::write(dir.join(CHALLENGES), body).map_err(|e| e.to_string())?;
        }
        Ok(Evaluated { evidence, build_ok: true })
    }

    fn challenges(&self, submission: u64) -> Vec<PublicChallenge> {
        self.load_challenges(submission).iter().enumerate().map(|(i, c)| PublicChallenge::of(i, c)).collect()
    }

    fn adjudicate(&self, sub: &BreakSubmission, target_submission: u64, prior: &[BugReport], id: ReportId) -> Result<Decision, String> {
        let target = self.target(&sub.target, target_submission)?;
        self.judge.adjudicate(sub, &target, prior, id).map_err(|e| e.to_string())
    }

    fn precheck(
        &self,
        fix: &Fix,
        bundle: &Path,
        original: u64,
        reports: &[BugReport],
        submissions: &[(ReportId, BreakSubmission)],
    ) -> Result<Precheck, String> {
        let dir = self.work.join("fixes").join(fix.id.0.to_string());
        let fixed = self.build(bundle, &dir)?.map(|artifacts| TargetBuild {
            team: fix.builder.clone(),
            artifacts,
            challenges: self.load_challenges(original),
        });
        precheck_fix(&self.judge, &self.descriptor, fix, fixed.as_ref(), reports, submissions).map_err(|e| e.to_string())
    }

    fn oracle_bugs(&self) -> Vec<OracleBug> {
        self.judge.oracle_bugs()
    }
}
