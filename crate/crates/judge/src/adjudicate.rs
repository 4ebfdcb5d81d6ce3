use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use bibifi_atm::mitm::{Strategy, ThreadMitm};
use bibifi_atm::{judge_integrity_mitm, judge_privacy_mitm, AtmError, Mitm, MitmPorts, ProcessMitm, SessionPair};
use bibifi_ehr::judge::{run_target, Reply};
use bibifi_ehr::{judge_break, run_oracle, BreakTest, EhrError, ServerTarget};
use bibifi_runner::{
    allocate_ports, is_crash_signal, run_test, Artifacts, IsolationProvider, Judgement, Limits, Session, Step, TestClass,
    TestDescriptor, TestOutcome,
};
use bibifi_scoring::{enforce_with, BugCategory, BugReport, LimitViolation, Problem, ReportId, SubmissionLimits, TeamId};
use bibifi_securelog::{judge_integrity, judge_privacy, Challenge};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::payload::{BreakSubmission, Payload};
use crate::JudgeError;

/// What the judge concluded about one break submission.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum Adjudication {
    Accepted { category: BugCategory, evidence: String },
    Rejected { reason: String },
    /// The oracle itself failed the breaker's test; held for the organizers.
    OracleBug { transcript: String },
    /// The target behaves differently on identical runs.
    Void { reason: String },
    Limit { violation: LimitViolation },
    Invalid { reason: String },
}

impl Adjudication {
    fn rejected(reason: impl Into<String>) -> Self {
        Adjudication::Rejected { reason: reason.into() }
    }

    fn invalid(reason: impl Into<String>) -> Self {
        Adjudication::Invalid { reason: reason.into() }
    }

    pub fn is_accepted(&self) -> bool {
        matches!(self, Adjudication::Accepted { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleBug {
    pub report: ReportId,
    pub submission: BreakSubmission,
    pub transcript: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub outcome: Adjudication,
    /// Present only when the break was accepted and within limits.
    pub report: Option<BugReport>,
}

/// A target team's built artifacts and, for the log problem, its challenge logs.
#[derive(Clone, Debug)]
pub struct TargetBuild {
    pub team: TeamId,
    pub artifacts: Artifacts,
    pub challenges: Vec<Challenge>,
}

fn script_test(steps: &[Step]) -> TestDescriptor {
    TestDescriptor::correctness("break", TestClass::Optional, steps.to_vec())
}

fn twice(
    provider: &dyn IsolationProvider,
    artifacts: &Artifacts,
    test: &TestDescriptor,
    loopback: bool,
) -> Result<Result<TestOutcome, String>, JudgeError> {
    let a = run_test(artifacts, test, provider, loopback)?;
    let b = run_test(artifacts, test, provider, loopback)?;
    if a.passed != b.passed || a.crash.is_some() != b.crash.is_some() {
        return Ok(Err(format!("target passed {} then {}", a.passed, b.passed)));
    }
    Ok(Ok(a))
}

/// A correctness break: the script must pass on the oracle and fail on the
/// target, the same way on two runs.
pub fn adjudicate_script(
    provider: &dyn IsolationProvider,
    oracle: &Artifacts,
    target: &Artifacts,
    steps: &[Step],
    loopback: bool,
) -> Result<Adjudication, JudgeError> {
    let test = script_test(steps);
    let o = run_test(oracle, &test, provider, loopback)?;
    if !o.passed {
        return Ok(Adjudication::OracleBug { transcript: o.transcript });
    }
    Ok(match twice(provider, target, &test, loopback)? {
        Err(reason) => Adjudication::Void { reason },
        Ok(t) if t.passed => Adjudication::rejected("target matches the expected outputs"),
        Ok(t) => Adjudication::Accepted { category: BugCategory::Correctness, evidence: t.transcript },
    })
}

/// A crash break: the target must die on a crash signal on both runs while
/// the oracle survives the same steps.
pub fn adjudicate_crash(
    provider: &dyn IsolationProvider,
    oracle: &Artifacts,
    target: &Artifacts,
    steps: &[Step],
    loopback: bool,
) -> Result<Adjudication, JudgeError> {
    let test = script_test(steps);
    let o = run_test(oracle, &test, provider, loopback)?;
    if let Some(c) = o.crash {
        return Ok(Adjudication::OracleBug { transcript: format!("oracle crashed: {c}\n{}", o.transcript) });
    }
    Ok(match twice(provider, target, &test, loopback)? {
        Err(reason) => Adjudication::Void { reason },
        Ok(TestOutcome { crash: Some(c), transcript, .. }) => {
            Adjudication::Accepted { category: BugCategory::Crash, evidence: format!("{c}\n{transcript}") }
        }
        Ok(_) => Adjudication::rejected("target did not crash"),
    })
}

/// Maps a security judgement to an adjudication. `second` is a repeat run.
fn security(claim: BugCategory, first: Judgement, second: Judgement) -> Adjudication {
    use Judgement::*;
    match (first, second) {
        (Confirmed { evidence }, Confirmed { .. }) => Adjudication::Accepted { category: claim, evidence },
        (Crash { evidence }, Crash { .. }) => Adjudication::Accepted { category: BugCategory::Crash, evidence },
        (Disallowed { reason }, _) | (_, Disallowed { reason }) => Adjudication::rejected(format!("disallowed: {reason}")),
        (Rejected { reason }, Rejected { .. }) => Adjudication::Rejected { reason },
        (a, b) => Adjudication::Void { reason: format!("runs disagree: {a:?} / {b:?}") },
    }
}

const CRASH_POLL: Duration = Duration::from_millis(500);

/// Adjudicates submissions for one problem and keeps the oracle-bug queue.
pub struct Judge {
    pub problem: Problem,
    pub provider: Arc<dyn IsolationProvider>,
    /// Built reference implementation, used for scripted breaks.
    pub oracle: Artifacts,
    pub loopback: bool,
    pub limits: SubmissionLimits,
    oracle_bugs: Mutex<Vec<OracleBug>>,
}

impl Judge {
    pub fn new(problem: Problem, provider: Arc<dyn IsolationProvider>, oracle: Artifacts, loopback: bool) -> Self {
        Judge { problem, provider, oracle, loopback, limits: SubmissionLimits::for_problem(problem), oracle_bugs: Mutex::default() }
    }

    pub fn with_limits(mut self, limits: SubmissionLimits) -> Self {
        self.limits = limits;
        self
    }

    pub fn oracle_bugs(&self) -> Vec<OracleBug> {
        self.oracle_bugs.lock().unwrap().clone()
    }

    /// Removes a resolved entry from the queue.
    pub fn resolve_oracle_bug(&self, report: ReportId) -> Option<OracleBug> {
        let mut q = self.oracle_bugs.lock().unwrap();
        let i = q.iter().position(|b| b.report == report)?;
        Some(q.remove(i))
    }

    /// Judges `sub` against `target`. `prior` holds the reports already
    /// recorded, for the submission limits.
    pub fn adjudicate(
        &self,
        sub: &BreakSubmission,
        target: &TargetBuild,
        prior: &[BugReport],
        id: ReportId,
    ) -> Result<Decision, JudgeError> {
        let outcome = self.judge(sub, target, id)?;
        if let Adjudication::OracleBug { transcript } = &outcome {
            self.oracle_bugs.lock().unwrap().push(OracleBug { report: id, submission: sub.clone(), transcript: transcript.clone() });
        }
        let Adjudication::Accepted { category, evidence } = &outcome else {
            return Ok(Decision { outcome, report: None });
        };
        let report = BugReport {
            id,
            breaker: sub.breaker.clone(),
            target: sub.target.clone(),
            category: *category,
            accepted: true,
            evidence: evidence.clone(),
        };
        match enforce_with(self.limits, prior, &report) {
            Ok(()) => Ok(Decision { outcome, report: Some(report) }),
            Err(violation) => Ok(Decision { outcome: Adjudication::Limit { violation }, report: None }),
        }
    }

    fn judge(&self, sub: &BreakSubmission, target: &TargetBuild, id: ReportId) -> Result<Adjudication, JudgeError> {
        if sub.breaker == sub.target {
            return Ok(Adjudication::invalid("a team cannot break its own submission"));
        }
        if sub.target != target.team {
            return Ok(Adjudication::invalid("submission names a different target"));
        }
        if !sub.payload.supports(self.problem, sub.claim) {
            return Ok(Adjudication::invalid(format!("a {} payload cannot show {}", sub.payload.kind(), sub.claim)));
        }
        let p = self.provider.as_ref();
        match &sub.payload {
            Payload::Script { steps } => match sub.claim {
                BugCategory::Crash => adjudicate_crash(p, &self.oracle, &target.artifacts, steps, self.loopback),
                _ => adjudicate_script(p, &self.oracle, &target.artifacts, steps, self.loopback),
            },
            Payload::LogPrivacy { challenge, query, claimed } => {
                let Some(c) = target.challenges.get(*challenge) else {
                    return Ok(Adjudication::invalid(format!("no challenge {challenge}")));
                };
                let run = || -> Result<Judgement, JudgeError> {
                    let s = Session::open(self.provider.clone(), target.artifacts.clone())?;
                    judge_privacy(&s, &c.log, &c.token, claimed, query).map_err(securelog_error)
                };
                repeat(sub.claim, run)
            }
            Payload::LogIntegrity { challenge, corrupted, query } => {
                let Some(c) = target.challenges.get(*challenge) else {
                    return Ok(Adjudication::invalid(format!("no challenge {challenge}")));
                };
                let Ok(bytes) = hex::decode(corrupted) else {
                    return Ok(Adjudication::invalid("corrupted log is not hex"));
                };
                let Some(transcript) = c.transcript_revealed.then(|| c.parsed_transcript()).flatten() else {
                    return Ok(Adjudication::invalid(format!("challenge {challenge} is not an integrity challenge")));
                };
                let run = || -> Result<Judgement, JudgeError> {
                    let s = Session::open(self.provider.clone(), target.artifacts.clone())?;
                    judge_integrity(&s, &c.log, &bytes, &c.token, query, &transcript).map_err(securelog_error)
                };
                repeat(sub.claim, run)
            }
            Payload::Mitm { strategy, program, args } => {
                let mitm: Box<dyn Mitm> = match (strategy, program) {
                    (Some(s), None) => match Strategy::parse(s) {
                        Some(s) => Box::new(ThreadMitm(s)),
                        None => return Ok(Adjudication::invalid(format!("unknown strategy {s:?}"))),
                    },
                    (None, Some(path)) if path.is_absolute() && path.is_file() => Box::new(ProcessMitm {
                        provider: self.provider.clone(),
                        program: path.clone(),
                        prefix: args.clone(),
                    }),
                    (None, Some(path)) => return Ok(Adjudication::invalid(format!("no MITM program at {}", path.display()))),
                    _ => return Ok(Adjudication::invalid("give exactly one of strategy and program")),
                };
                let rng = std::cell::RefCell::new(ChaCha8Rng::seed_from_u64(id.0));
                let run = || -> Result<Judgement, JudgeError> {
                    let ports = MitmPorts::allocate()?;
                    let s = Session::open(self.provider.clone(), target.artifacts.clone())?
                        .with_limits(bibifi_atm::harness::target_limits(&ports));
                    let mut pair = SessionPair::new(s);
                    let j = match sub.claim {
                        BugCategory::Privacy => judge_privacy_mitm(&mut pair, mitm.as_ref(), &ports, &mut *rng.borrow_mut()),
                        _ => judge_integrity_mitm(&mut pair, mitm.as_ref(), &ports, &mut *rng.borrow_mut()),
                    };
                    j.map_err(atm_error)
                };
                repeat(sub.claim, run)
            }
            Payload::Programs { .. } => {
                let test = sub.payload.break_test().expect("programs payload");
                self.judge_ehr(&test, &target.artifacts, sub.claim)
            }
        }
    }

    fn judge_ehr(&self, test: &BreakTest, artifacts: &Artifacts, claim: BugCategory) -> Result<Adjudication, JudgeError> {
        let run = || -> Result<(Vec<Reply>, Option<i32>), JudgeError> {
            let port = allocate_ports(1)?[0];
            let session = Session::open(self.provider.clone(), artifacts.clone())?
                .with_limits(Limits::test().with_ports(&[port]));
            let mut server = match ServerTarget::start(&session, port, test.admin_password()) {
                Ok(s) => s,
                Err(EhrError::Start(e)) => return Err(JudgeError::Target(format!("server did not start: {e}"))),
                Err(EhrError::Runner(e)) => return Err(e.into()),
            };
            let replies = run_target(&mut server, test).map_err(|e| JudgeError::Target(e.to_string()))?;
            let mut signal = server.crash_signal();
            if signal.is_none() && replies.iter().any(Option::is_none) {
                let until = Instant::now() + CRASH_POLL;
                while signal.is_none() && Instant::now() < until {
                    std::thread::sleep(Duration::from_millis(20));
                    signal = server.crash_signal();
                }
            }
            Ok((replies, signal.filter(|s| is_crash_signal(*s))))
        };
        let (first, second) = match (run(), run()) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(JudgeError::Target(reason)), _) | (_, Err(JudgeError::Target(reason))) => {
                return Ok(Adjudication::Rejected { reason })
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        };
        if first != second {
            return Ok(Adjudication::Void { reason: "target output differs between two runs".into() });
        }
        let oracle = run_oracle(test);
        let verdict = judge_break(&oracle, &first.0, claim);
        // A server killed by a legal program is unavailable to everyone else,
        // so the classifier's availability verdict stands; the signal is noted.
        Ok(match (verdict.category, verdict.judgement) {
            (Some(category), Judgement::Confirmed { evidence }) => match first.1 {
                Some(sig) => Adjudication::Accepted { category, evidence: format!("{evidence}; server signal {sig}") },
                None => Adjudication::Accepted { category, evidence },
            },
            (_, Judgement::Disallowed { reason }) => Adjudication::rejected(format!("disallowed: {reason}")),
            (_, Judgement::Rejected { reason }) => Adjudication::Rejected { reason },
            (_, j) => Adjudication::rejected(format!("{j:?}")),
        })
    }
}

/// Runs a security judgement twice. Target faults reject the break; oracle
/// faults queue it; sandbox errors propagate.
fn repeat(claim: BugCategory, run: impl Fn() -> Result<Judgement, JudgeError>) -> Result<Adjudication, JudgeError> {
    let both = run().and_then(|a| Ok((a, run()?)));
    match both {
        Ok((a, b)) => Ok(security(claim, a, b)),
        Err(JudgeError::Target(reason)) => Ok(Adjudication::Rejected { reason }),
        Err(JudgeError::Oracle(transcript)) => Ok(Adjudication::OracleBug { transcript }),
        Err(JudgeError::Invalid(reason)) => Ok(Adjudication::Invalid { reason }),
        Err(e) => Err(e),
    }
}

fn securelog_error(e: bibifi_securelog::JudgeError) -> JudgeError {
    match e {
        bibifi_securelog::JudgeError::Runner(e) => JudgeError::Runner(e),
        bibifi_securelog::JudgeError::Io(e) => JudgeError::Io(e),
        bibifi_securelog::JudgeError::Malformed(m) => JudgeError::Invalid(m),
        e => JudgeError::Target(e.to_string()),
    }
}

fn atm_error(e: AtmError) -> JudgeError {
    match e {
        AtmError::Runner(e) => JudgeError::Runner(e),
        AtmError::Io(e) => JudgeError::Io(e),
        e @ AtmError::BankStart(_) => JudgeError::Target(e.to_string()),
        AtmError::OracleFault(f) => JudgeError::Oracle(f),
    }
}
