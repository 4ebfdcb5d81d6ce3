//! The real backend: bundles are built and judged in sandboxes. The problem
//! here is a toy `logread` whose queries a shell script can answer.

mod common;

use std::collections::BTreeSet;
use std::os::unix::fs::PermissionsExt;
use std::path::Path;
use std::sync::Arc;

use base64::Engine;
use bibifi_judge::{FixState, Payload};
use bibifi_runner::{LocalProvider, ProblemDescriptor, Step, TestClass, TestDescriptor};
use bibifi_scoring::{BugCategory, FixId, Points, Problem, ReportId, SubmissionLimits, TeamId};
use bibifi_service::contest::{BreakRequest, FixDecisionRequest, FixRequest, RegisterRequest};
use bibifi_service::*;
use common::{idle, ADMIN};

const GOOD: &str = "printf 'alice,bob\\n'";
const BUGGY: &str = "case \"$*\" in *-T*) printf 'bob,alice\\n' ;; *) printf 'alice,bob\\n' ;; esac";

fn exec(path: &Path, body: &str) {
    std::fs::write(path, body).unwrap();
    std::fs::set_permissions(path, std::fs::Permissions::from_mode(0o755)).unwrap();
}

/// A bundle whose `build` emits a `logread` running `body`.
fn bundle(body: &str) -> Vec<u8> {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("logread.sh"), format!("#!/bin/sh\n{body}\n")).unwrap();
    exec(&dir.path().join("build"), "#!/bin/sh\ncp logread.sh logread && chmod +x logread\n");
    bibifi_runner::archive::pack_dir(dir.path()).unwrap()
}

fn query(flag: &str) -> Vec<Step> {
    vec![Step::run("logread", &["-K", "k", flag, "log"]).expect(0, "alice,bob\n")]
}

fn descriptor() -> ProblemDescriptor {
    ProblemDescriptor {
        problem: Problem::Securelog,
        artifacts: vec!["logread".into()],
        tests: vec![TestDescriptor::correctness("state", TestClass::Mandatory, query("-S"))],
        break_categories: BTreeSet::from([BugCategory::Correctness, BugCategory::Crash]),
        limits: SubmissionLimits::for_problem(Problem::Securelog),
        loopback: false,
    }
}

struct Env {
    dir: tempfile::TempDir,
    c: Arc<Contest>,
}

fn open() -> Env {
    let dir = tempfile::tempdir().unwrap();
    let oracle = dir.path().join("oracle");
    std::fs::create_dir(&oracle).unwrap();
    exec(&oracle.join("logread"), &format!("#!/bin/sh\n{GOOD}\n"));
    let config = ContestConfig::new(Problem::Securelog);
    std::fs::write(dir.path().join("contest.toml"), "problem = \"securelog\"\n").unwrap();
    let data = dir.path().join("data");
    let backend =
        RunnerBackend::new(&config, descriptor(), Arc::new(LocalProvider::new()), &oracle, &data.join("work")).unwrap();
    let c = Contest::open(config, &data, Arc::new(backend), Arc::new(ManualClock::default()), ADMIN).unwrap();
    Env { dir, c }
}

fn team(c: &Contest, name: &str) -> Caller {
    Caller::Team(c.register(&Caller::Anonymous, RegisterRequest { team: name.into(), members: vec![] }).unwrap().team)
}

#[test]
fn build_break_fix_with_sandboxed_builds() {
    let Env { dir, c } = open();
    let admin = Caller::Admin;
    let (a, b, z) = (team(&c, "a"), team(&c, "b"), team(&c, "z"));
    c.set_phase(&admin, Phase::Build).unwrap();
    c.submit(&a, Some("sh".into()), bundle(GOOD)).unwrap();
    c.submit(&b, Some("sh".into()), bundle(BUGGY)).unwrap();
    c.submit(&z, None, bundle("exit 3")).unwrap();
    idle(&c);
    let s = c.state();
    let qualified: Vec<bool> = ["a", "b", "z"].iter().map(|t| s.teams[&TeamId(t.to_string())].qualified).collect();
    assert_eq!(qualified, [true, true, false]);

    c.set_phase(&admin, Phase::Break).unwrap();
    let brk = |who: &Caller, target: &str, flag: &str| {
        let req = BreakRequest {
            target: TeamId(target.into()),
            claim: BugCategory::Correctness,
            payload: Payload::Script { steps: query(flag) },
            attachment: None,
        };
        c.submit_break(who, req).unwrap().id
    };
    let hit = brk(&a, "b", "-T");
    let miss = brk(&b, "a", "-T");
    idle(&c);
    let reports = c.reports(&a).unwrap();
    assert_eq!(reports.found.iter().map(|r| r.id.0).collect::<Vec<_>>(), [hit]);
    let missed = c.break_info(&b, ReportId(miss)).unwrap();
    assert!(matches!(missed.outcome, Some(bibifi_judge::Adjudication::Rejected { .. })), "{missed:?}");

    c.set_phase(&admin, Phase::Fix).unwrap();
    let fix = |body: &str| {
        let archive = base64::engine::general_purpose::STANDARD.encode(bundle(body));
        c.submit_fix(&b, FixRequest { covered: vec![ReportId(hit)], diff_ref: "d".into(), archive }).unwrap().id
    };
    let still_buggy = fix(BUGGY);
    let fixed = fix(GOOD);
    idle(&c);
    let state = |id| c.fix_info(&b, FixId(id)).unwrap().fix.state;
    assert!(matches!(state(still_buggy), FixState::Rejected { judge: None, .. }), "{:?}", state(still_buggy));
    assert_eq!(state(fixed), FixState::Pending);
    c.decide_fix(&admin, FixDecisionRequest { fix: FixId(fixed), approve: true, judge: "j".into(), rationale: "ok".into() })
        .unwrap();
    let board = c.scoreboard(&admin).unwrap();
    let row = |t: &str| board.rows.iter().find(|r| r.team.0 == t).unwrap().clone();
    assert_eq!(row("b").resilience, Points::from_integer(-25));
    assert_eq!(row("a").break_score, Points::from_integer(25));

    // The offline fold from the admin tool prints the same bytes.
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_bibifi-admin"))
        .args(["replay", "--data"])
        .arg(dir.path().join("data"))
        .arg("--config")
        .arg(dir.path().join("contest.toml"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim_end(), serde_json::to_string(&*board).unwrap());
}
