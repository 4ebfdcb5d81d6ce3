use std::collections::BTreeSet;

use bibifi_runner::{Measure, ProblemDescriptor, Ready, Step, TestClass, TestDescriptor};
use bibifi_scoring::{BugCategory, Problem, SubmissionLimits};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::interp::{Interpreter, Variant};

fn start() -> Step {
    Step::Start {
        name: "server".into(),
        program: "server".into(),
        args: vec!["{port:server}".into()],
        ready: Ready::Listen("server".into()),
    }
}

fn send(program: &str, expect: &[&str]) -> Step {
    Step::Send {
        port: "server".into(),
        input: program.into(),
        expect: Some(expect.iter().map(|l| format!("{l}\n")).collect()),
    }
}

fn prog(who: &str, pw: &str, body: &str) -> String {
    format!("as principal {who} password \"{pw}\" do\n{body}\n***\n")
}

const DENIED: &str = r#"{"status":"DENIED"}"#;
const FAILED: &str = r#"{"status":"FAILED"}"#;

fn returning(json: &str) -> String {
    format!(r#"{{"status":"RETURNING","output":{json}}}"#)
}

fn status(name: &str) -> String {
    format!(r#"{{"status":"{name}"}}"#)
}

/// The build-it test suite.
pub fn descriptor() -> ProblemDescriptor {
    let paper = vec![
        start(),
        send(
            &prog(
                "admin",
                "admin",
                "   create principal alice \"alices_password\"\n   set msg = \"Hi Alice. Good luck!\"\n   set delegation msg admin read -> alice\n   return \"success\"",
            ),
            &[&status("CREATE_PRINCIPAL"), &status("SET"), &status("SET_DELEGATION"), &returning("\"success\"")],
        ),
        send(&prog("alice", "alices_password", "   return msg"), &[&returning("\"Hi Alice. Good luck!\"")]),
    ];
    let access = vec![
        start(),
        send(
            &prog("admin", "admin", "create principal bob \"b\"\nset secret = \"s\"\nreturn \"ok\""),
            &[&status("CREATE_PRINCIPAL"), &status("SET"), &returning("\"ok\"")],
        ),
        send(&prog("bob", "b", "return secret"), &[DENIED]),
        send(&prog("bob", "b", "set secret = \"mine\"\nreturn \"done\""), &[DENIED]),
        send(&prog("bob", "wrong", "return \"x\""), &[DENIED]),
        send(&prog("nobody", "b", "return \"x\""), &[FAILED]),
        send(&prog("bob", "b", "create principal eve \"e\"\nreturn \"x\""), &[DENIED]),
        send(&prog("bob", "b", "set own = \"o\"\nreturn own"), &[&status("SET"), &returning("\"o\"")]),
        send(&prog("admin", "admin", "return secret"), &[&returning("\"s\"")]),
    ];
    let rollback = vec![
        start(),
        send(&prog("admin", "admin", "set a = \"1\"\nset b = missing\nreturn a"), &[FAILED]),
        send(&prog("admin", "admin", "return a"), &[FAILED]),
        send("as principal admin password \"admin\" do\nreturn \"unterminated\n***\n", &[FAILED]),
    ];
    let data = vec![
        start(),
        send(
            &prog(
                "admin",
                "admin",
                "set l = []\nappend to l with \"a\"\nlocal r = { name = \"n\", dose = \"5\" }\nappend to l with r\nforeach e in l replacewith e\nreturn l",
            ),
            &[&status("SET"), &status("APPEND"), &status("LOCAL"), &status("APPEND"), &status("FOREACH"), &returning(r#"["a",{"name":"n","dose":"5"}]"#)],
        ),
        send(&prog("admin", "admin", "local q = l\nforeach e in q replacewith e.name\nreturn q"), &[FAILED]),
        send(&prog("admin", "admin", "local k = []\nappend to k with l\nreturn k"), &[&status("LOCAL"), &status("APPEND"), &returning(r#"["a",{"name":"n","dose":"5"}]"#)]),
        send(&prog("admin", "admin", "local l = \"x\"\nreturn l"), &[FAILED]),
    ];
    let delegation = vec![
        start(),
        send(
            &prog("admin", "admin", "create principal a \"a\"\ncreate principal b \"b\"\nset x = \"v\"\nset delegation x admin read -> a\nset delegation x admin delegate -> a\nreturn \"ok\""),
            &[&status("CREATE_PRINCIPAL"), &status("CREATE_PRINCIPAL"), &status("SET"), &status("SET_DELEGATION"), &status("SET_DELEGATION"), &returning("\"ok\"")],
        ),
        send(&prog("a", "a", "set delegation x a read -> b\nreturn x"), &[&status("SET_DELEGATION"), &returning("\"v\"")]),
        send(&prog("b", "b", "return x"), &[&returning("\"v\"")]),
        send(&prog("b", "b", "set delegation x b read -> a\nreturn \"x\""), &[DENIED]),
        send(&prog("admin", "admin", "delete delegation x admin read -> a\nreturn \"ok\""), &[&status("DELETE_DELEGATION"), &returning("\"ok\"")]),
        send(&prog("b", "b", "return x"), &[DENIED]),
        send(&prog("admin", "admin", "default delegator = a\ncreate principal c \"c\"\nreturn \"ok\""), &[&status("DEFAULT_DELEGATOR"), &status("CREATE_PRINCIPAL"), &returning("\"ok\"")]),
        send(&prog("c", "c", "change password c \"c2\"\nreturn \"ok\""), &[&status("CHANGE_PASSWORD"), &returning("\"ok\"")]),
        send(&prog("c", "c", "return \"x\""), &[DENIED]),
    ];
    let shutdown = vec![
        start(),
        send(&prog("admin", "admin", "exit"), &[&status("EXITING")]),
    ];

    let mut rng = ChaCha8Rng::seed_from_u64(2016);
    let mut oracle = Interpreter::new(Variant::Oracle, "admin");
    let mut workload = vec![start()];
    for p in crate::gen::sequence(&mut rng, "admin", 60) {
        let text = p.to_string();
        let lines = oracle.run(&p, None).lines().expect("oracle answers");
        workload.push(send(&text, &lines.iter().map(String::as_str).collect::<Vec<_>>()));
    }

    ProblemDescriptor {
        problem: Problem::Ehr,
        artifacts: vec!["server".into()],
        tests: vec![
            TestDescriptor::correctness("paper-example", TestClass::Mandatory, paper),
            TestDescriptor::correctness("access-control", TestClass::Mandatory, access),
            TestDescriptor::correctness("rollback", TestClass::Mandatory, rollback),
            TestDescriptor::correctness("data", TestClass::Optional, data),
            TestDescriptor::correctness("delegation", TestClass::Optional, delegation),
            TestDescriptor::correctness("exit", TestClass::Optional, shutdown),
            TestDescriptor::performance("programs", Measure::WallTime, workload),
        ],
        break_categories: BTreeSet::from([
            BugCategory::Correctness,
            BugCategory::Crash,
            BugCategory::Privacy,
            BugCategory::Integrity,
            BugCategory::Availability,
        ]),
        limits: SubmissionLimits::for_problem(Problem::Ehr),
        loopback: true,
    }
}
