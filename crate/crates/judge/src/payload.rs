use std::path::PathBuf;

use bibifi_ehr::BreakTest;
use bibifi_runner::{Ready, Step};
use bibifi_scoring::{BugCategory, Problem, TeamId};
use serde::{Deserialize, Serialize};

/// The problem-specific evidence attached to a break.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Payload {
    /// Commands with expected outputs; for correctness and crash breaks.
    Script { steps: Vec<Step> },
    /// A claimed answer to a query over one of the target's challenge logs.
    LogPrivacy { challenge: usize, query: Vec<String>, claimed: String },
    /// A tampered copy (hex) of a challenge log, and the query to run on it.
    LogIntegrity { challenge: usize, corrupted: String, query: Vec<String> },
    /// A man in the middle: a built-in strategy name or an executable.
    Mitm {
        #[serde(default)]
        strategy: Option<String>,
        #[serde(default)]
        program: Option<PathBuf>,
        #[serde(default)]
        args: Vec<String>,
    },
    /// Programs sent in order to a fresh server.
    Programs {
        #[serde(default)]
        admin_password: Option<String>,
        programs: Vec<String>,
    },
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Script { .. } => "script",
            Payload::LogPrivacy { .. } => "log-privacy",
            Payload::LogIntegrity { .. } => "log-integrity",
            Payload::Mitm { .. } => "mitm",
            Payload::Programs { .. } => "programs",
        }
    }

    /// Whether this payload can demonstrate `claim` on `problem`.
    pub fn supports(&self, problem: Problem, claim: BugCategory) -> bool {
        use BugCategory::*;
        match self {
            Payload::Script { .. } => matches!(claim, Correctness | Crash),
            Payload::LogPrivacy { .. } => problem == Problem::Securelog && claim == Privacy,
            Payload::LogIntegrity { .. } => problem == Problem::Securelog && claim == Integrity,
            Payload::Mitm { .. } => problem == Problem::Atm && matches!(claim, Privacy | Integrity),
            Payload::Programs { .. } => problem == Problem::Ehr,
        }
    }

    pub fn break_test(&self) -> Option<BreakTest> {
        match self {
            Payload::Programs { admin_password, programs } => {
                Some(BreakTest { admin_password: admin_password.clone(), programs: programs.clone() })
            }
            _ => None,
        }
    }
}

/// A program sequence as a script against the `server` artifact, with no
/// expected replies.
pub fn programs_script(test: &BreakTest) -> Vec<Step> {
    let mut steps = vec![Step::Start {
        name: "server".into(),
        program: "server".into(),
        args: vec!["{port:server}".into(), test.admin_password().into()],
        ready: Ready::Listen("server".into()),
    }];
    steps.extend(test.programs.iter().map(|p| Step::Send { port: "server".into(), input: p.clone(), expect: None }));
    steps
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BreakSubmission {
    pub breaker: TeamId,
    pub target: TeamId,
    pub claim: BugCategory,
    pub payload: Payload,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shapes() {
        let p: Payload = serde_json::from_str(r#"{"kind":"programs","programs":["as principal admin password \"admin\" do\nexit\n***"]}"#).unwrap();
        assert_eq!(p.break_test().unwrap().admin_password(), "admin");
        let m: Payload = serde_json::from_str(r#"{"kind":"mitm","strategy":"replay"}"#).unwrap();
        assert_eq!(m, Payload::Mitm { strategy: Some("replay".into()), program: None, args: vec![] });
        let s: Payload = serde_json::from_str(r#"{"kind":"script","steps":[{"op":"run","program":"logread","args":["-K","k","-S","log"],"expect_exit":0,"expect_stdout":""}]}"#).unwrap();
        assert_eq!(s.kind(), "script");
        assert!(serde_json::from_str::<Payload>(r#"{"kind":"nope"}"#).is_err());
    }

    #[test]
    fn payload_support_matrix() {
        let script = Payload::Script { steps: vec![] };
        assert!(script.supports(Problem::Atm, BugCategory::Crash));
        assert!(!script.supports(Problem::Atm, BugCategory::Integrity));
        let mitm = Payload::Mitm { strategy: None, program: None, args: vec![] };
        assert!(mitm.supports(Problem::Atm, BugCategory::Privacy));
        assert!(!mitm.supports(Problem::Securelog, BugCategory::Privacy));
        let programs = Payload::Programs { admin_password: None, programs: vec![] };
        for c in [BugCategory::Correctness, BugCategory::Availability, BugCategory::Privacy] {
            assert!(programs.supports(Problem::Ehr, c));
        }
    }
}
