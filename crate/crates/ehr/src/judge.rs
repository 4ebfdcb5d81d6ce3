//! Break classification: a program sequence runs on the oracle and on the
//! target from the same initial state, and the first divergence is classified.

use std::time::{Duration, Instant};

use bibifi_runner::{Background, Judgement, RunnerError, Session};
use bibifi_scoring::BugCategory;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::interp::{Denial, Interpreter, Outcome, Status, Variant};
use crate::server::{self, BUDGET, DEFAULT_ADMIN_PASSWORD};

/// Reply to one program; `None` when the connection closed without an answer.
pub type Reply = Option<Vec<String>>;

#[derive(Debug, thiserror::Error)]
pub enum EhrError {
    #[error(transparent)]
    Runner(#[from] RunnerError),
    #[error("server did not start: {0}")]
    Start(String),
}

/// A break test: the server's admin password and the programs to send in order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BreakTest {
    #[serde(default)]
    pub admin_password: Option<String>,
    pub programs: Vec<String>,
}

impl BreakTest {
    pub fn admin_password(&self) -> &str {
        self.admin_password.as_deref().unwrap_or(DEFAULT_ADMIN_PASSWORD)
    }
}

pub trait EhrTarget {
    fn submit(&mut self, program: &str) -> Result<Reply, EhrError>;
}

/// A variant running in this process. After an exit or a crash every later
/// program goes unanswered, as with a dead server.
pub struct InProcessTarget {
    pub interp: Interpreter,
    dead: bool,
}

impl InProcessTarget {
    pub fn new(variant: Variant, admin_password: &str) -> Self {
        InProcessTarget { interp: Interpreter::new(variant, admin_password), dead: false }
    }
}

impl EhrTarget for InProcessTarget {
    fn submit(&mut self, program: &str) -> Result<Reply, EhrError> {
        if self.dead {
            return Ok(None);
        }
        let out = self.interp.run_text(program, Some(Instant::now() + BUDGET));
        self.dead = matches!(out, Outcome::Crashed | Outcome::Done { exit: true, .. });
        Ok(out.lines())
    }
}

/// A built `server` artifact started inside a session.
pub struct ServerTarget {
    port: u16,
    server: Option<Background>,
}

pub const START_TIMEOUT: Duration = Duration::from_secs(10);

impl ServerTarget {
    /// `session` must allow listening on `port`.
    pub fn start(session: &Session, port: u16, admin_password: &str) -> Result<Self, EhrError> {
        let mut bg = session.spawn("server", &[port.to_string(), admin_password.to_string()])?;
        if !bg.wait_for_listen(port, START_TIMEOUT) {
            let r = bg.stop();
            return Err(EhrError::Start(format!("exit {:?}, stderr {}", r.exit_code, String::from_utf8_lossy(&r.stderr))));
        }
        Ok(ServerTarget { port, server: Some(bg) })
    }

    /// The server's exit signal, if it has died.
    pub fn crash_signal(&mut self) -> Option<i32> {
        let bg = self.server.as_mut()?;
        if bg.is_running() != Some(false) {
            return None;
        }
        self.server.take().map(|b| b.stop()).and_then(|r| r.signal)
    }
}

impl EhrTarget for ServerTarget {
    fn submit(&mut self, program: &str) -> Result<Reply, EhrError> {
        match server::submit(self.port, program, BUDGET + Duration::from_secs(2)) {
            Ok(r) => Ok(r),
            Err(_) => Ok(None),
        }
    }
}

/// What the oracle did with each program (`None` once it has exited), and
/// its state digest afterwards.
#[derive(Clone, Debug)]
pub struct OracleRun {
    pub outcomes: Vec<Option<Outcome>>,
    pub digests: Vec<String>,
}

pub fn run_oracle(test: &BreakTest) -> OracleRun {
    let mut target = InProcessTarget::new(Variant::Oracle, test.admin_password());
    let mut run = OracleRun { outcomes: vec![], digests: vec![] };
    for p in &test.programs {
        let out = (!target.dead).then(|| target.interp.run_text(p, None));
        target.dead |= matches!(out, Some(Outcome::Done { exit: true, .. }));
        run.digests.push(target.interp.state.digest());
        run.outcomes.push(out);
    }
    run
}

pub fn run_target(target: &mut dyn EhrTarget, test: &BreakTest) -> Result<Vec<Reply>, EhrError> {
    test.programs.iter().map(|p| target.submit(p)).collect()
}

fn normalize(lines: &[String]) -> Vec<Json> {
    lines.iter().map(|l| serde_json::from_str(l).unwrap_or_else(|_| Json::String(l.clone()))).collect()
}

fn statuses(lines: &[String]) -> Vec<String> {
    normalize(lines).iter().map(|v| v.get("status").and_then(Json::as_str).unwrap_or("?").to_string()).collect()
}

fn is_error(lines: &[String]) -> bool {
    let s = statuses(lines);
    s.len() == 1 && (s[0] == "DENIED" || s[0] == "FAILED")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EhrVerdict {
    pub category: Option<BugCategory>,
    pub claim: BugCategory,
    pub judgement: Judgement,
    /// Index of the first program whose replies differ.
    pub program: Option<usize>,
    pub oracle_digest: Option<String>,
}

fn classify(oracle: &Option<Outcome>, target: &Reply) -> BugCategory {
    let Some(oracle) = oracle else { return BugCategory::Correctness };
    let Some(t) = target else {
        return match oracle {
            Outcome::Done { .. } => BugCategory::Availability,
            _ => BugCategory::Correctness,
        };
    };
    let target_ok = !is_error(t);
    let names = statuses(t);
    let returned = names.iter().any(|s| s == "RETURNING");
    let mutated = names.iter().any(|s| Status::is_mutation(s));
    match oracle {
        Outcome::Done { .. } if !target_ok => BugCategory::Availability,
        Outcome::Denied(d) if target_ok => match d {
            Denial::Read(_) if returned => BugCategory::Privacy,
            Denial::Login if returned && !mutated => BugCategory::Privacy,
            _ if mutated => BugCategory::Integrity,
            _ => BugCategory::Correctness,
        },
        _ => BugCategory::Correctness,
    }
}

/// Classifies the first program whose replies differ. Later programs are
/// ignored because the two states may no longer agree.
pub fn judge_break(oracle: &OracleRun, target: &[Reply], claim: BugCategory) -> EhrVerdict {
    let mut verdict = EhrVerdict { category: None, claim, judgement: Judgement::rejected("target matches the oracle"), program: None, oracle_digest: None };
    if oracle.outcomes.contains(&Some(Outcome::OverBudget)) {
        verdict.judgement = Judgement::disallowed("the oracle exceeded its budget");
        return verdict;
    }
    for (i, (o, t)) in oracle.outcomes.iter().zip(target).enumerate() {
        let expected = o.as_ref().and_then(Outcome::lines);
        let same = match (&expected, t) {
            (Some(a), Some(b)) => normalize(a) == normalize(b),
            (None, None) => true,
            _ => false,
        };
        if same {
            continue;
        }
        let category = classify(o, t);
        verdict.category = Some(category);
        verdict.program = Some(i);
        verdict.oracle_digest = oracle.digests.get(i).cloned();
        verdict.judgement = Judgement::confirmed(format!(
            "program {i}: oracle {} / target {}",
            expected.map(|l| l.join(" ")).unwrap_or_else(|| "<no reply>".into()),
            t.as_ref().map(|l| l.join(" ")).unwrap_or_else(|| "<no reply>".into()),
        ));
        return verdict;
    }
    verdict
}

/// Runs a break test twice on fresh targets; a target that answers the same
/// test differently is not judged.
pub fn adjudicate(
    mut fresh: impl FnMut() -> Result<Box<dyn EhrTarget>, EhrError>,
    test: &BreakTest,
    claim: BugCategory,
) -> Result<EhrVerdict, EhrError> {
    let oracle = run_oracle(test);
    let first = run_target(fresh()?.as_mut(), test)?;
    let second = run_target(fresh()?.as_mut(), test)?;
    if first != second {
        return Ok(EhrVerdict {
            category: None,
            claim,
            judgement: Judgement::disallowed("target output differs between two runs"),
            program: None,
            oracle_digest: None,
        });
    }
    Ok(judge_break(&oracle, &first, claim))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lines(v: &[&str]) -> Reply {
        Some(v.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn classification_table() {
        let done = Some(Outcome::Done { statuses: vec![Status::Returning("\"x\"".into())], exit: false });
        let ret = lines(&[r#"{"status":"RETURNING","output":"x"}"#]);
        let set = lines(&[r#"{"status":"SET"}"#, r#"{"status":"RETURNING","output":"x"}"#]);
        let denied = lines(&[r#"{"status":"DENIED"}"#]);
        let read = Some(Outcome::Denied(Denial::Read("s".into())));
        assert_eq!(classify(&read, &ret), BugCategory::Privacy);
        assert_eq!(classify(&Some(Outcome::Denied(Denial::Mutation)), &set), BugCategory::Integrity);
        assert_eq!(classify(&Some(Outcome::Denied(Denial::Login)), &ret), BugCategory::Privacy);
        assert_eq!(classify(&Some(Outcome::Denied(Denial::Login)), &set), BugCategory::Integrity);
        assert_eq!(classify(&done, &None), BugCategory::Availability);
        assert_eq!(classify(&done, &denied), BugCategory::Availability);
        assert_eq!(classify(&done, &lines(&["nonsense"])), BugCategory::Correctness);
        assert_eq!(classify(&Some(Outcome::Failed), &ret), BugCategory::Correctness);
        assert_eq!(classify(&read, &lines(&[r#"{"status":"FAILED"}"#])), BugCategory::Correctness);
        assert_eq!(classify(&read, &None), BugCategory::Correctness);
        assert_eq!(classify(&None, &ret), BugCategory::Correctness);
    }

    #[test]
    fn key_order_and_whitespace_do_not_matter() {
        let test = BreakTest { admin_password: None, programs: vec!["as principal admin password \"admin\" do\nreturn { a = \"1\", b = \"2\" }\n***".into()] };
        let oracle = run_oracle(&test);
        let target = vec![lines(&[r#"{ "output": {"b":"2","a":"1"}, "status": "RETURNING" }"#])];
        assert_eq!(judge_break(&oracle, &target, BugCategory::Correctness).category, None);
    }
}
