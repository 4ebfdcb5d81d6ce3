#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use bibifi_judge::{BreakSubmission, Decision, Judge, Payload, TargetBuild};
use bibifi_runner::{Artifacts, IsolationProvider, LocalProvider, Session};
use bibifi_scoring::{BugCategory, BugReport, Problem, ReportId, TeamId};

pub fn exe(name: &str) -> PathBuf {
    PathBuf::from(match name {
        "logappend" => env!("CARGO_BIN_EXE_logappend"),
        "logread" => env!("CARGO_BIN_EXE_logread"),
        "bank" => env!("CARGO_BIN_EXE_bank"),
        "atm" => env!("CARGO_BIN_EXE_atm"),
        "server" => env!("CARGO_BIN_EXE_server"),
        "securelog-fixture" => env!("CARGO_BIN_EXE_securelog-fixture"),
        "atm-fixture" => env!("CARGO_BIN_EXE_atm-fixture"),
        "ehr-fixture" => env!("CARGO_BIN_EXE_ehr-fixture"),
        "mitm-fixture" => env!("CARGO_BIN_EXE_mitm-fixture"),
        other => panic!("no binary {other}"),
    })
}

/// Which implementation stands behind a problem's artifacts.
#[derive(Clone, Copy, Debug)]
pub enum Impl {
    Oracle,
    Fixture(&'static str),
}

pub fn artifact_names(problem: Problem) -> &'static [&'static str] {
    match problem {
        Problem::Securelog => &["logappend", "logread"],
        Problem::Atm => &["bank", "atm"],
        Problem::Ehr => &["server"],
    }
}

/// Writes wrappers for every artifact of `problem` into `dir`.
pub fn install(dir: &Path, problem: Problem, which: Impl) {
    std::fs::create_dir_all(dir).unwrap();
    for name in artifact_names(problem) {
        match which {
            Impl::Oracle => bibifi::install(dir, name, &exe(name), &[]),
            Impl::Fixture(variant) => match problem {
                Problem::Securelog => bibifi::install(dir, name, &exe("securelog-fixture"), &[variant, name]),
                Problem::Atm => bibifi::install(dir, name, &exe("atm-fixture"), &[variant, name]),
                Problem::Ehr => bibifi::install(dir, name, &exe("ehr-fixture"), &[variant]),
            },
        }
        .unwrap();
    }
}

pub fn artifacts(dir: &Path, problem: Problem, which: Impl) -> Artifacts {
    install(dir, problem, which);
    let names: Vec<String> = artifact_names(problem).iter().map(|s| s.to_string()).collect();
    Artifacts::from_dir(dir, &names).unwrap()
}

pub fn provider() -> Arc<dyn IsolationProvider> {
    Arc::new(LocalProvider::new())
}

/// A judge over the real oracle binaries, and a place to lay out targets.
pub struct Bench {
    pub problem: Problem,
    pub judge: Judge,
    pub dir: tempfile::TempDir,
}

impl Bench {
    pub fn new(problem: Problem) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let oracle = artifacts(&dir.path().join("oracle"), problem, Impl::Oracle);
        let loopback = problem != Problem::Securelog;
        Bench { problem, judge: Judge::new(problem, provider(), oracle, loopback), dir }
    }

    /// A target build; securelog targets get challenge logs made by their own binaries.
    pub fn target(&self, team: &str, which: Impl, seed: u64) -> TargetBuild {
        let arts = artifacts(&self.dir.path().join(team), self.problem, which);
        let challenges = if self.problem == Problem::Securelog {
            let session = Session::open(provider(), arts.clone()).unwrap();
            bibifi_securelog::generate_challenge_logs(&session, seed, 4).unwrap()
        } else {
            vec![]
        };
        TargetBuild { team: TeamId(team.into()), artifacts: arts, challenges }
    }

    pub fn judge(&self, target: &TargetBuild, claim: BugCategory, payload: Payload, prior: &[BugReport], id: u64) -> Decision {
        let sub = BreakSubmission { breaker: TeamId("breaker".into()), target: target.team.clone(), claim, payload };
        self.judge.adjudicate(&sub, target, prior, ReportId(id)).unwrap()
    }
}

pub fn prog(who: &str, pw: &str, body: &str) -> String {
    format!("as principal {who} password \"{pw}\" do\n{body}\n***\n")
}

pub fn programs(programs: Vec<String>) -> Payload {
    Payload::Programs { admin_password: None, programs }
}

/// Alice holds read and delegate on `var`, passes read to bob, then loses
/// her own read; bob's read must then be denied.
pub fn chain_break(alice: &str, bob: &str, var: &str) -> Vec<String> {
    vec![
        prog(
            "admin",
            "admin",
            &format!("create principal {alice} \"a\"\ncreate principal {bob} \"b\"\nset {var} = \"s\"\nset delegation {var} admin read -> {alice}\nset delegation {var} admin delegate -> {alice}\nreturn \"ok\""),
        ),
        prog(alice, "a", &format!("set delegation {var} {alice} read -> {bob}\nreturn \"ok\"")),
        prog("admin", "admin", &format!("delete delegation {var} admin read -> {alice}\nreturn \"ok\"")),
        prog(bob, "b", &format!("return {var}")),
    ]
}

pub fn crash_programs() -> Vec<String> {
    vec![prog("admin", "admin", "set l = []\nappend to l with []\nreturn l"), prog("admin", "admin", "return \"alive\"")]
}
