mod common;

use std::collections::BTreeSet;
use std::sync::Arc;

use base64::Engine;
use bibifi_judge::FixState;
use bibifi_scoring::{BugCategory, FixId, Points, ReportId, TeamId};
use bibifi_service::contest::{target_order, BreakRequest, FixDecisionRequest, FixRequest, RegisterRequest};
use bibifi_service::*;
use common::*;
use proptest::prelude::*;

struct Run {
    _dir: tempfile::TempDir,
    path: std::path::PathBuf,
    c: Arc<Contest>,
    admin: Caller,
}

impl Run {
    fn new(config: ContestConfig) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let c = fake_contest(dir.path(), config, Arc::new(ManualClock::default()));
        Run { path: dir.path().to_path_buf(), _dir: dir, c, admin: Caller::Admin }
    }

    fn team(&self, name: &str) -> Caller {
        let r = self.c.register(&Caller::Anonymous, RegisterRequest { team: name.into(), members: vec![] }).unwrap();
        assert_eq!(self.c.caller(Some(&r.token)).unwrap(), Caller::Team(TeamId(name.into())));
        Caller::Team(r.team)
    }

    fn phase(&self, p: Phase) {
        self.c.set_phase(&self.admin, p).unwrap();
    }

    fn brk(&self, who: &Caller, target: &str, verdict: &str) -> Result<u64, ApiError> {
        let req = BreakRequest { target: TeamId(target.into()), claim: BugCategory::Privacy, payload: programs(verdict), attachment: None };
        self.c.submit_break(who, req).map(|c| c.id)
    }

    /// The live board must equal a from-scratch fold of the log on disk.
    fn assert_replays(&self) {
        idle(&self.c);
        let live = serde_json::to_vec(&*self.c.scoreboard(&self.admin).unwrap()).unwrap();
        let replayed = Store::replay(&self.path).unwrap().scoreboard(&self.c.config.params());
        assert_eq!(live, serde_json::to_vec(&replayed).unwrap());
    }

    fn row(&self, team: &str) -> BoardRow {
        let b = self.c.scoreboard(&self.admin).unwrap();
        b.rows.iter().find(|r| r.team.0 == team).unwrap().clone()
    }
}

fn p(n: i64) -> Points {
    Points::from_integer(n)
}

#[test]
fn empty_contest_has_an_empty_board() {
    let r = Run::new(ehr());
    let b = r.c.scoreboard(&Caller::Anonymous).unwrap();
    assert!(b.rows.is_empty());
    assert_eq!(b.seq, 0);
}

#[test]
fn mini_contest_replays_and_fix_resplits_points() {
    let r = Run::new(ehr());
    let (a, b, c) = (r.team("a"), r.team("b"), r.team("c"));
    r.assert_replays();
    r.phase(Phase::Build);
    for (t, perf) in [(&a, 10), (&b, 20), (&c, 30)] {
        r.c.submit(t, Some("rust".into()), bundle(true, perf)).unwrap();
        r.assert_replays();
    }
    // Mandatory 50 + optional 25 + performance from 50 (best) to 0 (worst).
    assert_eq!([r.row("a").ship, r.row("b").ship, r.row("c").ship], [p(125), p(100), p(75)]);
    r.phase(Phase::Break);
    let first = r.brk(&b, "a", "accept:privacy").unwrap();
    r.assert_replays();
    let second = r.brk(&c, "a", "accept:privacy").unwrap();
    r.assert_replays();
    assert_eq!(r.row("a").resilience, p(-200));
    assert_eq!((r.row("b").break_score, r.row("c").break_score), (p(100), p(100)));

    r.phase(Phase::Fix);
    let archive = base64::engine::general_purpose::STANDARD.encode(archive(&[("precheck", "pass")]));
    let fix = r.c.submit_fix(&a, FixRequest { covered: vec![ReportId(first), ReportId(second)], diff_ref: "d1".into(), archive }).unwrap();
    r.assert_replays();
    let queue = r.c.review_queue(&r.admin).unwrap();
    assert_eq!(queue[0].fix.state, FixState::Pending);
    let state = r
        .c
        .decide_fix(&r.admin, FixDecisionRequest { fix: FixId(fix.id), approve: true, judge: "j1".into(), rationale: "one flaw".into() })
        .unwrap();
    assert!(matches!(state, FixState::Approved { .. }));
    r.assert_replays();
    assert_eq!(r.row("a").resilience, p(-100));
    assert_eq!((r.row("b").break_score, r.row("c").break_score), (p(50), p(50)));

    // Reopening the store (from snapshot or log) gives the same board.
    let seq = r.c.scoreboard(&r.admin).unwrap().seq;
    drop(r.c);
    let again = fake_contest(&r.path, ehr(), Arc::new(ManualClock::default()));
    assert_eq!(again.scoreboard(&Caller::Admin).unwrap().seq, seq);
}

#[test]
fn rejected_fix_and_failed_precheck() {
    let r = Run::new(ehr());
    let (a, b) = (r.team("a"), r.team("b"));
    r.phase(Phase::Build);
    r.c.submit(&a, None, bundle(true, 1)).unwrap();
    r.c.submit(&b, None, bundle(true, 1)).unwrap();
    idle(&r.c);
    r.phase(Phase::Break);
    let ids: Vec<u64> = (0..2).map(|_| r.brk(&b, "a", "accept:correctness").unwrap()).collect();
    idle(&r.c);
    r.phase(Phase::Fix);
    let enc = |files: &[(&str, &str)]| base64::engine::general_purpose::STANDARD.encode(archive(files));
    let covered: Vec<ReportId> = ids.iter().map(|i| ReportId(*i)).collect();
    let bad = r.c.submit_fix(&a, FixRequest { covered: covered.clone(), diff_ref: "x".into(), archive: enc(&[("precheck", "fail")]) }).unwrap();
    let good = r.c.submit_fix(&a, FixRequest { covered: covered.clone(), diff_ref: "y".into(), archive: enc(&[("precheck", "pass")]) }).unwrap();
    idle(&r.c);
    let info = r.c.fix_info(&a, FixId(bad.id)).unwrap();
    assert!(matches!(info.fix.state, FixState::Rejected { judge: None, .. }), "{:?}", info.fix.state);
    let decide = |fix, approve, rationale: &str| {
        r.c.decide_fix(&r.admin, FixDecisionRequest { fix: FixId(fix), approve, judge: "j".into(), rationale: rationale.into() })
    };
    assert_eq!(decide(bad.id, true, "").unwrap_err().status, 409);
    assert_eq!(decide(good.id, false, "").unwrap_err().status, 422, "rejection needs a rationale");
    assert!(matches!(decide(good.id, false, "two subsystems").unwrap(), FixState::Rejected { .. }));
    assert_eq!(decide(good.id, true, "").unwrap_err().status, 409, "decided once");
    r.assert_replays();
    // Two singleton groups of correctness bugs.
    assert_eq!(r.row("a").resilience, p(-50));
    assert_eq!(r.row("b").break_score, p(50));
    // Covered reports must be against the fixing team.
    let err = r.c.submit_fix(&b, FixRequest { covered, diff_ref: "z".into(), archive: enc(&[]) }).unwrap_err();
    assert_eq!(err.status, 422);
}

#[test]
fn limits_are_surfaced_and_hold_by_construction() {
    let r = Run::new(ehr());
    let (a, b) = (r.team("a"), r.team("b"));
    r.phase(Phase::Build);
    r.c.submit(&a, None, bundle(true, 1)).unwrap();
    idle(&r.c);
    r.phase(Phase::Break);
    for _ in 0..5 {
        r.brk(&b, "a", "accept:correctness").unwrap();
        idle(&r.c);
    }
    let err = r.brk(&b, "a", "accept:correctness").unwrap_err();
    assert_eq!((err.status, err.message.as_str()), (409, "per-target report cap of 5 reached"));
    // Concurrent submissions can pass the up-front check; recording rechecks.
    let r = Run::new(ehr());
    let (a, b) = (r.team("a"), r.team("b"));
    r.phase(Phase::Build);
    r.c.submit(&a, None, bundle(true, 1)).unwrap();
    idle(&r.c);
    r.phase(Phase::Break);
    for _ in 0..8 {
        let _ = r.brk(&b, "a", "accept:correctness");
    }
    idle(&r.c);
    let s = r.c.state();
    assert_eq!(s.reports().len(), 5);
    let limited = s.breaks.values().filter(|x| matches!(x.outcome, Some(bibifi_judge::Adjudication::Limit { .. }))).count();
    assert_eq!(limited + 5, s.breaks.len());
}

#[test]
fn resubmission_supersedes_prior_evidence() {
    let r = Run::new(ehr());
    let a = r.team("a");
    r.phase(Phase::Build);
    r.c.submit(&a, None, bundle(true, 5)).unwrap();
    idle(&r.c);
    assert!(r.row("a").qualified);
    r.c.submit(&a, Some("c".into()), bundle(false, 5)).unwrap();
    r.assert_replays();
    let row = r.row("a");
    assert!(!row.qualified);
    assert_eq!((row.ship, row.language.as_deref()), (p(0), Some("c")));
}

/// Every mutating operation, tried in every phase.
#[test]
fn phase_gates_cover_every_operation() {
    type Op = fn(&Run, &Caller) -> Result<(), ApiError>;
    let ops: [(&str, &[Phase], Op); 5] = [
        ("register", &[Phase::Registration, Phase::Build], |r, _| {
            let n = format!("t{}", r.c.state().seq);
            r.c.register(&Caller::Anonymous, RegisterRequest { team: n, members: vec![] }).map(|_| ())
        }),
        ("submit", &[Phase::Build], |r, t| r.c.submit(t, None, bundle(true, 1)).map(|_| ())),
        ("targets", &[Phase::Break], |r, t| r.c.targets(t).map(|_| ())),
        ("break", &[Phase::Break], |r, t| r.brk(t, "a", "reject").map(|_| ())),
        ("fix", &[Phase::Fix], |r, t| {
            let archive = base64::engine::general_purpose::STANDARD.encode(archive(&[]));
            // A fix needs an accepted report against the caller; seeded below.
            let covered = r.c.reports(t).unwrap().against.iter().map(|x| x.id).collect();
            r.c.submit_fix(t, FixRequest { covered, diff_ref: "d".into(), archive }).map(|_| ())
        }),
    ];
    let r = Run::new(ehr());
    let (a, b) = (r.team("a"), r.team("b"));
    for (i, phase) in Phase::ALL.into_iter().enumerate() {
        if i > 0 {
            r.phase(phase);
        }
        if phase == Phase::Build {
            r.c.submit(&a, None, bundle(true, 1)).unwrap();
            r.c.submit(&b, None, bundle(true, 1)).unwrap();
            idle(&r.c);
        }
        if phase == Phase::Break {
            r.brk(&b, "a", "accept:crash").unwrap();
            idle(&r.c);
        }
        for (name, allowed, op) in &ops {
            let caller = if *name == "fix" { &a } else { &b };
            let res = op(&r, caller);
            idle(&r.c);
            match res {
                Ok(()) => assert!(allowed.contains(&phase), "{name} succeeded in {phase}"),
                Err(e) => {
                    assert!(!allowed.contains(&phase), "{name} failed in {phase}: {e}");
                    assert_eq!(e.status, 409, "{name} in {phase}: {e}");
                }
            }
        }
    }
    assert!(r.c.set_phase(&r.admin, Phase::Fix).is_err(), "phases never go back");
}

#[test]
fn schedule_drives_phases_and_closes_windows() {
    let mut config = ehr();
    config.schedule = Some(Schedule {
        build: Window { start: 100, end: 200 },
        break_: Window { start: 300, end: 400 },
        fix: Window { start: 400, end: 500 },
    });
    let dir = tempfile::tempdir().unwrap();
    let clock = Arc::new(ManualClock::default());
    let c = fake_contest(dir.path(), config, clock.clone());
    let reg = |n: &str| c.register(&Caller::Anonymous, RegisterRequest { team: n.into(), members: vec![] });
    let a = Caller::Team(reg("a").unwrap().team);
    assert_eq!(c.submit(&a, None, bundle(true, 1)).unwrap_err().status, 409);
    clock.set(150);
    c.submit(&a, None, bundle(true, 1)).unwrap();
    idle(&c);
    clock.set(250);
    assert_eq!(c.submit(&a, None, bundle(true, 1)).unwrap_err().status, 409, "after the build deadline");
    assert_eq!(reg("late").unwrap_err().status, 409);
    clock.set(300);
    assert_eq!(c.scoreboard(&a).unwrap().phase, Phase::Break);
    clock.set(600);
    assert_eq!(c.scoreboard(&a).unwrap().phase, Phase::Closed);
    let phases: Vec<serde_json::Value> = c
        .events(&Caller::Admin, 0)
        .unwrap()
        .into_iter()
        .filter(|e| e["kind"] == "phase-change")
        .map(|e| e["payload"]["phase"].clone())
        .collect();
    assert_eq!(phases, ["build", "break", "closed"]);
}

#[test]
fn tokens_and_hidden_scores() {
    let mut config = ehr();
    config.hide_scores = true;
    let r = Run::new(config);
    let a = r.team("a");
    assert_eq!(r.c.caller(Some("not-a-token")).unwrap_err().status, 401);
    assert_eq!(r.c.scoreboard(&a).unwrap_err().status, 403);
    assert!(r.c.scoreboard(&r.admin).is_ok());
    assert_eq!(r.c.register(&Caller::Anonymous, RegisterRequest { team: "a".into(), members: vec![] }).unwrap_err().status, 409);
    assert_eq!(r.c.register(&Caller::Anonymous, RegisterRequest { team: "a b".into(), members: vec![] }).unwrap_err().status, 422);
    for p in [Phase::Build, Phase::Break, Phase::Fix, Phase::Closed] {
        r.phase(p);
    }
    assert!(r.c.scoreboard(&a).is_ok());
}

#[test]
fn public_events_are_redacted() {
    let r = Run::new(ehr());
    let (a, b, c) = (r.team("a"), r.team("b"), r.team("c"));
    r.phase(Phase::Build);
    r.c.submit(&a, None, bundle(true, 1)).unwrap();
    idle(&r.c);
    r.phase(Phase::Break);
    r.brk(&b, "a", "accept:privacy").unwrap();
    idle(&r.c);
    let public = serde_json::to_string(&r.c.events(&b, 0).unwrap()).unwrap();
    assert!(!public.contains("token_hash") && !public.contains("accept:privacy"), "{public}");
    let full = serde_json::to_string(&r.c.events(&r.admin, 0).unwrap()).unwrap();
    assert!(full.contains("token_hash") && full.contains("accept:privacy"));
    assert_eq!(r.c.events(&Caller::Anonymous, 3).unwrap().len() as u64, r.c.state().seq - 3);
    // The breaker and the target (once accepted) may read the break; others may not.
    assert!(r.c.break_info(&b, ReportId(1)).is_ok());
    assert!(r.c.break_info(&a, ReportId(1)).is_ok());
    assert_eq!(r.c.break_info(&c, ReportId(1)).unwrap_err().status, 403);
    assert_eq!(r.c.submission(&c, 1).unwrap_err().status, 403);
    assert!(r.c.submission(&a, 1).is_ok());
}

#[test]
fn targets_exclude_self_and_unqualified() {
    let r = Run::new(ehr());
    let teams: Vec<Caller> = ["a", "b", "c", "d"].iter().map(|n| r.team(n)).collect();
    r.phase(Phase::Build);
    for (i, t) in teams.iter().enumerate() {
        r.c.submit(t, Some(format!("lang{i}")), bundle(i != 3, 1)).unwrap();
    }
    idle(&r.c);
    r.phase(Phase::Break);
    let seen = r.c.targets(&teams[0]).unwrap();
    let names: BTreeSet<String> = seen.iter().map(|t| t.team.0.clone()).collect();
    assert_eq!(names, BTreeSet::from(["b".to_string(), "c".to_string()]));
    assert_eq!(seen, r.c.targets(&teams[0]).unwrap());
    assert!(seen.iter().all(|t| t.remaining == 5));
    assert_eq!(r.brk(&teams[0], "d", "accept:privacy").unwrap_err().status, 404);
    assert_eq!(r.brk(&teams[0], "a", "accept:privacy").unwrap_err().status, 422);
    assert_eq!(r.c.targets(&r.admin).unwrap_err().status, 403);
}

proptest! {
    #[test]
    fn target_order_is_a_keyed_permutation(seed in any::<u64>(), team in "[a-z]{1,8}") {
        let sorted: Vec<u32> = (0..10).collect();
        let t = TeamId(team);
        let once = target_order(seed, &t, &sorted);
        prop_assert_eq!(&once, &target_order(seed, &t, &sorted));
        let mut back = once.clone();
        back.sort();
        prop_assert_eq!(back, sorted.clone());
        // Ten teams almost surely do not all see one order.
        let orders: BTreeSet<Vec<u32>> = (0..10).map(|i| target_order(seed, &TeamId(format!("team{i}")), &sorted)).collect();
        prop_assert!(orders.len() >= 2);
    }
}
