//! Seeded grammar fuzzer. Programs draw names from small pools so that
//! sequences exercise both granted and refused operations.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::ast::{Cmd, Delegation, Expr, Program, Right, Target, Terminator, Value};
use crate::state::ADMIN;

pub const PRINCIPALS: [&str; 4] = ["alice", "bob", "carol", "dave"];
const GLOBALS: [&str; 4] = ["x", "y", "msg", "records"];
const LOCALS: [&str; 3] = ["t", "u", "acc"];
const FIELDS: [&str; 3] = ["name", "dose", "note"];
const WORDS: [&str; 8] = ["", "a", "Hi there", "42", "x.y", "-> ***", "{ }", "semi;colon"];

pub fn password(principal: &str, admin_password: &str) -> String {
    if principal == ADMIN { admin_password.to_string() } else { format!("{principal}_pw") }
}

fn string<R: Rng>(rng: &mut R) -> String {
    WORDS.choose(rng).unwrap().to_string()
}

fn name<R: Rng>(rng: &mut R) -> String {
    if rng.random_bool(0.7) { GLOBALS.choose(rng) } else { LOCALS.choose(rng) }.unwrap().to_string()
}

fn principal<R: Rng>(rng: &mut R) -> String {
    if rng.random_bool(0.35) { ADMIN } else { PRINCIPALS.choose(rng).unwrap() }.to_string()
}

fn value<R: Rng>(rng: &mut R) -> Value {
    match rng.random_range(0..5) {
        0 | 1 => Value::Str(string(rng)),
        2 | 3 => Value::Var(name(rng)),
        _ => Value::Field(name(rng), FIELDS.choose(rng).unwrap().to_string()),
    }
}

pub fn expr<R: Rng>(rng: &mut R) -> Expr {
    match rng.random_range(0..6) {
        0 => Expr::EmptyList,
        1 => {
            let n = rng.random_range(1..=3);
            let mut fields: Vec<(String, Value)> = Vec::new();
            for _ in 0..n {
                fields.push((FIELDS.choose(rng).unwrap().to_string(), value(rng)));
            }
            Expr::Record(fields)
        }
        _ => Expr::Value(value(rng)),
    }
}

fn delegation<R: Rng>(rng: &mut R) -> Delegation {
    Delegation {
        target: if rng.random_bool(0.2) { Target::All } else { Target::Var(GLOBALS.choose(rng).unwrap().to_string()) },
        issuer: principal(rng),
        right: *Right::ALL.choose(rng).unwrap(),
        grantee: principal(rng),
    }
}

pub fn cmd<R: Rng>(rng: &mut R, admin_password: &str) -> Cmd {
    match rng.random_range(0..20) {
        0 | 1 => {
            let name = principal(rng);
            Cmd::CreatePrincipal { password: password(&name, admin_password), name }
        }
        2 => {
            let name = principal(rng);
            let password = if rng.random_bool(0.8) { password(&name, admin_password) } else { "changed".into() };
            Cmd::ChangePassword { name, password }
        }
        3..=6 => Cmd::Set { var: name(rng), expr: expr(rng) },
        7 | 8 => Cmd::Append { var: name(rng), expr: expr(rng) },
        9 | 10 => Cmd::Local { var: LOCALS.choose(rng).unwrap().to_string(), expr: expr(rng) },
        11 => Cmd::Foreach { elem: "e".into(), list: name(rng), expr: if rng.random_bool(0.5) { Expr::Value(Value::Var("e".into())) } else { expr(rng) } },
        12..=15 => Cmd::SetDelegation(delegation(rng)),
        16 | 17 => Cmd::DeleteDelegation(delegation(rng)),
        _ => Cmd::DefaultDelegator(principal(rng)),
    }
}

/// One program. `allow_exit` controls whether `exit` may terminate it.
pub fn program<R: Rng>(rng: &mut R, admin_password: &str, allow_exit: bool) -> Program {
    let who = principal(rng);
    let pw = if rng.random_bool(0.9) { password(&who, admin_password) } else { "wrong".into() };
    let n = rng.random_range(0..=4);
    let cmds = (0..n).map(|_| cmd(rng, admin_password)).collect();
    let end = if allow_exit && rng.random_bool(0.05) { Terminator::Exit } else { Terminator::Return(if rng.random_bool(0.4) { Expr::Value(Value::Str(string(rng))) } else { expr(rng) }) };
    Program { principal: who, password: pw, cmds, end }
}

/// A session: a setup program creating every principal, then random programs.
pub fn sequence<R: Rng>(rng: &mut R, admin_password: &str, len: usize) -> Vec<Program> {
    let setup = Program {
        principal: ADMIN.into(),
        password: admin_password.into(),
        cmds: PRINCIPALS
            .iter()
            .map(|p| Cmd::CreatePrincipal { name: p.to_string(), password: password(p, admin_password) })
            .chain([Cmd::Set { var: "records".into(), expr: Expr::EmptyList }])
            .collect(),
        end: Terminator::Return(Expr::Value(Value::Str("ready".into()))),
    };
    std::iter::once(setup).chain((0..len).map(|_| program(rng, admin_password, false))).collect()
}
