use std::net::TcpListener;
use std::sync::atomic::AtomicBool;
use std::time::Duration;

use bibifi_ehr::judge::{run_oracle, Reply};
use bibifi_ehr::server::{serve, submit, ServeEnd};
use bibifi_ehr::{adjudicate, judge_break, BreakTest, EhrError, EhrTarget, InProcessTarget, Interpreter, Outcome, Variant};
use bibifi_runner::Judgement;
use bibifi_scoring::BugCategory;

const ADMIN_PROGRAM: &str = "as principal admin password \"admin\" do\n   create principal alice \"alices_password\"\n   set msg = \"Hi Alice. Good luck!\"\n   set delegation msg admin read -> alice\n   return \"success\"\n***\n";

fn prog(who: &str, pw: &str, body: &str) -> String {
    format!("as principal {who} password \"{pw}\" do\n{body}\n***\n")
}

#[test]
fn paper_session_over_tcp_is_byte_exact() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    let server = std::thread::spawn(move || serve(listener, &mut Interpreter::new(Variant::Oracle, "admin"), &AtomicBool::new(false)).unwrap());
    let t = Duration::from_secs(10);
    let first = submit(port, ADMIN_PROGRAM, t).unwrap().unwrap().join("\n");
    assert_eq!(
        first,
        "{\"status\":\"CREATE_PRINCIPAL\"}\n{\"status\":\"SET\"}\n{\"status\":\"SET_DELEGATION\"}\n{\"status\":\"RETURNING\",\"output\":\"success\"}"
    );
    let second = submit(port, &prog("alice", "alices_password", "return msg"), t).unwrap().unwrap();
    assert_eq!(second, ["{\"status\":\"RETURNING\",\"output\":\"Hi Alice. Good luck!\"}"]);
    submit(port, &prog("admin", "admin", "exit"), t).unwrap();
    assert_eq!(server.join().unwrap(), ServeEnd::Exited);
}

#[test]
fn bob_reading_secret_is_denied_without_side_effects() {
    let mut i = Interpreter::new(Variant::Oracle, "admin");
    i.run_text(&prog("admin", "admin", "create principal bob \"b\"\nset secret = \"s\"\nreturn \"ok\""), None);
    let before = i.state.clone();
    let out = i.run_text(&prog("bob", "b", "local copy = \"x\"\nset other = \"y\"\nreturn secret"), None);
    assert_eq!(out.text().unwrap(), "{\"status\":\"DENIED\"}\n");
    assert_eq!(i.state, before);
}

fn in_process(variant: Variant, test: &BreakTest) -> impl FnMut() -> Result<Box<dyn EhrTarget>, EhrError> + '_ {
    move || Ok(Box::new(InProcessTarget::new(variant, test.admin_password())) as Box<dyn EhrTarget>)
}

fn chain_break() -> BreakTest {
    BreakTest {
        admin_password: None,
        programs: vec![
            prog("admin", "admin", "create principal alice \"a\"\ncreate principal bob \"b\"\nset secret = \"s\"\nset delegation secret admin read -> alice\nset delegation secret admin delegate -> alice\nreturn \"ok\""),
            prog("alice", "a", "set delegation secret alice read -> bob\nreturn \"ok\""),
            prog("admin", "admin", "delete delegation secret admin read -> alice\nreturn \"ok\""),
            prog("bob", "b", "return secret"),
        ],
    }
}

fn delegate_break() -> BreakTest {
    BreakTest {
        admin_password: None,
        programs: vec![
            prog("admin", "admin", "create principal alice \"a\"\ncreate principal bob \"b\"\nset secret = \"s\"\nset delegation secret admin read -> alice\nreturn \"ok\""),
            prog("alice", "a", "set delegation secret alice read -> bob\nreturn \"ok\""),
            prog("bob", "b", "return secret"),
        ],
    }
}

fn password_break() -> BreakTest {
    BreakTest {
        admin_password: Some("s3cret".into()),
        programs: vec![
            prog("admin", "s3cret", "set secret = \"s\"\nreturn \"ok\""),
            prog("admin", "admin", "return secret"),
        ],
    }
}

fn crash_break() -> BreakTest {
    BreakTest {
        admin_password: None,
        programs: vec![prog("admin", "admin", "set l = []\nappend to l with []\nreturn l"), prog("admin", "admin", "return \"alive\"")],
    }
}

#[test]
fn fixture_breaks_are_classified() {
    let cases = [
        (Variant::ChainUnchecked, chain_break(), BugCategory::Privacy, 3),
        (Variant::SkipDelegateCheck, delegate_break(), BugCategory::Integrity, 1),
        (Variant::HardcodedPassword, password_break(), BugCategory::Privacy, 1),
        (Variant::Crash, crash_break(), BugCategory::Availability, 0),
    ];
    for (variant, test, category, program) in cases {
        let v = adjudicate(in_process(variant, &test), &test, category).unwrap();
        assert!(v.judgement.is_confirmed(), "{variant:?}: {v:?}");
        assert_eq!((v.category, v.program), (Some(category), Some(program)), "{variant:?}");
        assert!(v.oracle_digest.is_some());
        let oracle = adjudicate(in_process(Variant::Oracle, &test), &test, category).unwrap();
        assert!(matches!(oracle.judgement, Judgement::Rejected { .. }), "{variant:?}: {oracle:?}");
    }
}

#[test]
fn hardcoded_password_write_is_integrity_even_when_privacy_is_claimed() {
    let mut test = password_break();
    test.programs[1] = prog("admin", "admin", "set secret = \"overwritten\"\nreturn \"ok\"");
    let v = adjudicate(in_process(Variant::HardcodedPassword, &test), &test, BugCategory::Privacy).unwrap();
    assert_eq!(v.category, Some(BugCategory::Integrity));
    assert_eq!(v.claim, BugCategory::Privacy);
}

#[test]
fn bob_writing_secret_pair_is_integrity() {
    let test = BreakTest {
        admin_password: None,
        programs: vec![
            prog("admin", "admin", "create principal bob \"b\"\nset secret = \"s\"\nreturn \"ok\""),
            prog("bob", "b", "set secret = \"x\"\nreturn \"done\""),
        ],
    };
    let oracle = run_oracle(&test);
    let target: Vec<Reply> = vec![
        oracle.outcomes[0].as_ref().and_then(Outcome::lines),
        Some(vec!["{\"status\":\"SET\"}".into(), "{\"status\":\"RETURNING\",\"output\":\"done\"}".into()]),
    ];
    let v = judge_break(&oracle, &target, BugCategory::Integrity);
    assert_eq!((v.category, v.program), (Some(BugCategory::Integrity), Some(1)));
}

#[test]
fn denying_a_legal_program_is_availability_and_a_wrong_value_is_correctness() {
    let test = BreakTest { admin_password: None, programs: vec![prog("admin", "admin", "set x = \"1\"\nreturn x")] };
    let oracle = run_oracle(&test);
    let denied = judge_break(&oracle, &[Some(vec!["{\"status\":\"DENIED\"}".into()])], BugCategory::Availability);
    assert_eq!(denied.category, Some(BugCategory::Availability));
    let wrong = judge_break(&oracle, &[Some(vec!["{\"status\":\"SET\"}".into(), "{\"status\":\"RETURNING\",\"output\":\"2\"}".into()])], BugCategory::Correctness);
    assert_eq!(wrong.category, Some(BugCategory::Correctness));
}

struct Flaky(u32);

impl EhrTarget for Flaky {
    fn submit(&mut self, _program: &str) -> Result<Reply, EhrError> {
        Ok(Some(vec![format!("{{\"status\":\"RETURNING\",\"output\":\"{}\"}}", self.0)]))
    }
}

#[test]
fn nondeterministic_targets_are_not_judged() {
    let test = BreakTest { admin_password: None, programs: vec![prog("admin", "admin", "return \"0\"")] };
    let mut n = 0;
    let v = adjudicate(
        || {
            n += 1;
            Ok(Box::new(Flaky(n)) as Box<dyn EhrTarget>)
        },
        &test,
        BugCategory::Correctness,
    )
    .unwrap();
    assert!(matches!(v.judgement, Judgement::Disallowed { .. }), "{v:?}");
    assert_eq!(v.category, None);
}
