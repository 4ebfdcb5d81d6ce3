//! Transactional interpreter. A program either commits all of its effects or
//! answers a single DENIED/FAILED line and leaves the state untouched.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::ast::{Cmd, Delegation, Expr, Program, Right, Target, Terminator, Value};
use crate::parse::parse_program;
use crate::state::{password_hash, Assertion, Data, Global, State, ADMIN};

/// The oracle and the deliberately flawed fixtures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Oracle,
    /// Honours any assertion without following it back to the owner or admin.
    ChainUnchecked,
    /// Aborts when an empty list is appended.
    Crash,
    /// Also accepts the password "admin" for admin.
    HardcodedPassword,
    /// Lets a principal delegate a right without holding `delegate`.
    SkipDelegateCheck,
}

impl Variant {
    pub const ALL: [Variant; 5] =
        [Variant::Oracle, Variant::ChainUnchecked, Variant::Crash, Variant::HardcodedPassword, Variant::SkipDelegateCheck];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Oracle => "oracle",
            Variant::ChainUnchecked => "chain-unchecked",
            Variant::Crash => "crash",
            Variant::HardcodedPassword => "hardcoded-password",
            Variant::SkipDelegateCheck => "skip-delegate-check",
        }
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Variant::ALL.into_iter().find(|v| v.name() == s).ok_or_else(|| format!("unknown variant {s}"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Status {
    CreatePrincipal,
    ChangePassword,
    Set,
    Append,
    Local,
    Foreach,
    SetDelegation,
    DeleteDelegation,
    DefaultDelegator,
    /// Output already rendered as JSON.
    Returning(String),
    Exiting,
    Denied,
    Failed,
}

impl Status {
    pub fn name(&self) -> &'static str {
        match self {
            Status::CreatePrincipal => "CREATE_PRINCIPAL",
            Status::ChangePassword => "CHANGE_PASSWORD",
            Status::Set => "SET",
            Status::Append => "APPEND",
            Status::Local => "LOCAL",
            Status::Foreach => "FOREACH",
            Status::SetDelegation => "SET_DELEGATION",
            Status::DeleteDelegation => "DELETE_DELEGATION",
            Status::DefaultDelegator => "DEFAULT_DELEGATOR",
            Status::Returning(_) => "RETURNING",
            Status::Exiting => "EXITING",
            Status::Denied => "DENIED",
            Status::Failed => "FAILED",
        }
    }

    /// Statuses that report a change to the shared state.
    pub fn is_mutation(name: &str) -> bool {
        !matches!(name, "LOCAL" | "RETURNING" | "DENIED" | "FAILED")
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Returning(out) => write!(f, "{{\"status\":\"RETURNING\",\"output\":{out}}}"),
            s => write!(f, "{{\"status\":\"{}\"}}", s.name()),
        }
    }
}

/// Why the oracle refused a program.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Denial {
    /// Wrong password.
    Login,
    /// Reading a global without the read right.
    Read(String),
    /// Any state change the caller may not make.
    Mutation,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Done { statuses: Vec<Status>, exit: bool },
    Denied(Denial),
    Failed,
    /// The fixture's process would have died here.
    Crashed,
    OverBudget,
}

impl Outcome {
    /// Response lines, or `None` when the connection is dropped.
    pub fn lines(&self) -> Option<Vec<String>> {
        match self {
            Outcome::Done { statuses, .. } => Some(statuses.iter().map(Status::to_string).collect()),
            Outcome::Denied(_) => Some(vec![Status::Denied.to_string()]),
            Outcome::Failed => Some(vec![Status::Failed.to_string()]),
            Outcome::Crashed | Outcome::OverBudget => None,
        }
    }

    pub fn text(&self) -> Option<String> {
        self.lines().map(|ls| ls.iter().map(|l| format!("{l}\n")).collect())
    }
}

enum Stop {
    Denied(Denial),
    Failed,
    Crash,
    Budget,
}

type Step<T> = Result<T, Stop>;

struct Exec<'a> {
    state: State,
    caller: &'a str,
    locals: BTreeMap<String, Data>,
    variant: Variant,
    deadline: Option<Instant>,
}

impl Exec<'_> {
    fn has(&self, principal: &str, right: Right, var: &str) -> bool {
        match self.variant {
            Variant::ChainUnchecked => self.state.check_right_unchained(principal, right, var),
            _ => self.state.check_right(principal, right, var),
        }
    }

    fn tick(&self) -> Step<()> {
        match self.deadline {
            Some(d) if Instant::now() > d => Err(Stop::Budget),
            _ => Ok(()),
        }
    }

    fn read_var(&self, x: &str) -> Step<Data> {
        if let Some(v) = self.locals.get(x) {
            return Ok(v.clone());
        }
        let Some(g) = self.state.globals.get(x) else { return Err(Stop::Failed) };
        if !self.has(self.caller, Right::Read, x) {
            return Err(Stop::Denied(Denial::Read(x.into())));
        }
        Ok(g.value.clone())
    }

    fn value(&self, v: &Value) -> Step<Data> {
        match v {
            Value::Str(s) => Ok(Data::Str(s.clone())),
            Value::Var(x) => self.read_var(x),
            Value::Field(x, y) => match self.read_var(x)? {
                Data::Record(fields) => fields.into_iter().find(|(k, _)| k == y).map(|(_, v)| Data::Str(v)).ok_or(Stop::Failed),
                _ => Err(Stop::Failed),
            },
        }
    }

    fn expr(&self, e: &Expr) -> Step<Data> {
        match e {
            Expr::Value(v) => self.value(v),
            Expr::EmptyList => Ok(Data::List(vec![])),
            Expr::Record(fields) => {
                let mut out: Vec<(String, String)> = Vec::with_capacity(fields.len());
                for (name, v) in fields {
                    if out.iter().any(|(k, _)| k == name) {
                        return Err(Stop::Failed);
                    }
                    match self.value(v)? {
                        Data::Str(s) => out.push((name.clone(), s)),
                        _ => return Err(Stop::Failed),
                    }
                }
                Ok(Data::Record(out))
            }
        }
    }

    fn exists(&self, x: &str) -> bool {
        self.locals.contains_key(x) || self.state.globals.contains_key(x)
    }

    fn require_admin(&self) -> Step<()> {
        if self.caller == ADMIN { Ok(()) } else { Err(Stop::Denied(Denial::Mutation)) }
    }

    fn delegation_targets(&self, d: &Delegation) -> Step<Vec<String>> {
        if self.caller != ADMIN && self.caller != d.issuer {
            return Err(Stop::Denied(Denial::Mutation));
        }
        if !self.state.principals.contains_key(&d.issuer) || !self.state.principals.contains_key(&d.grantee) {
            return Err(Stop::Failed);
        }
        let may = |x: &str| {
            self.has(&d.issuer, d.right, x) && (self.variant == Variant::SkipDelegateCheck || self.has(&d.issuer, Right::Delegate, x))
        };
        match &d.target {
            Target::Var(x) => {
                if !self.state.globals.contains_key(x) {
                    return Err(Stop::Failed);
                }
                if !may(x) {
                    return Err(Stop::Denied(Denial::Mutation));
                }
                Ok(vec![x.clone()])
            }
            Target::All => Ok(self.state.globals.keys().filter(|x| may(x)).cloned().collect()),
        }
    }

    fn cmd(&mut self, c: &Cmd) -> Step<Status> {
        self.tick()?;
        match c {
            Cmd::CreatePrincipal { name, password } => {
                self.require_admin()?;
                if self.state.principals.contains_key(name) {
                    return Err(Stop::Failed);
                }
                self.state.principals.insert(name.clone(), password_hash(password));
                if let Some(q) = self.state.default_delegator.clone() {
                    let mut inherited = Vec::new();
                    for x in self.state.globals.keys().filter(|x| self.has(&q, Right::Delegate, x)) {
                        for r in Right::ALL.into_iter().filter(|r| self.has(&q, *r, x)) {
                            inherited.push(Assertion { var: x.clone(), issuer: q.clone(), right: r, grantee: name.clone() });
                        }
                    }
                    self.state.assertions.extend(inherited);
                }
                Ok(Status::CreatePrincipal)
            }
            Cmd::ChangePassword { name, password } => {
                if self.caller != ADMIN && self.caller != name {
                    return Err(Stop::Denied(Denial::Mutation));
                }
                let Some(h) = self.state.principals.get_mut(name) else { return Err(Stop::Failed) };
                *h = password_hash(password);
                Ok(Status::ChangePassword)
            }
            Cmd::Set { var, expr } => {
                let v = self.expr(expr)?;
                if let Some(slot) = self.locals.get_mut(var) {
                    *slot = v;
                } else if self.state.globals.contains_key(var) {
                    if !self.has(self.caller, Right::Write, var) {
                        return Err(Stop::Denied(Denial::Mutation));
                    }
                    self.state.globals.get_mut(var).expect("checked").value = v;
                } else {
                    self.state.globals.insert(var.clone(), Global { value: v, owner: self.caller.to_string() });
                }
                Ok(Status::Set)
            }
            Cmd::Append { var, expr } => {
                let v = self.expr(expr)?;
                if self.variant == Variant::Crash && v == Data::List(vec![]) {
                    return Err(Stop::Crash);
                }
                let is_local = self.locals.contains_key(var);
                if !is_local {
                    if !self.state.globals.contains_key(var) {
                        return Err(Stop::Failed);
                    }
                    if !self.has(self.caller, Right::Write, var) && !self.has(self.caller, Right::Append, var) {
                        return Err(Stop::Denied(Denial::Mutation));
                    }
                }
                let slot = match self.locals.get_mut(var) {
                    Some(l) => l,
                    None => &mut self.state.globals.get_mut(var).expect("checked").value,
                };
                let Data::List(items) = slot else { return Err(Stop::Failed) };
                match v {
                    Data::List(more) => items.extend(more),
                    other => items.push(other),
                }
                Ok(Status::Append)
            }
            Cmd::Local { var, expr } => {
                let v = self.expr(expr)?;
                if self.exists(var) {
                    return Err(Stop::Failed);
                }
                self.locals.insert(var.clone(), v);
                Ok(Status::Local)
            }
            Cmd::Foreach { elem, list, expr } => {
                let is_local = self.locals.contains_key(list);
                if !is_local {
                    if !self.state.globals.contains_key(list) {
                        return Err(Stop::Failed);
                    }
                    if !self.has(self.caller, Right::Read, list) {
                        return Err(Stop::Denied(Denial::Read(list.clone())));
                    }
                    if !self.has(self.caller, Right::Write, list) {
                        return Err(Stop::Denied(Denial::Mutation));
                    }
                }
                let current = match self.locals.get(list) {
                    Some(l) => l.clone(),
                    None => self.state.globals[list].value.clone(),
                };
                let Data::List(items) = current else { return Err(Stop::Failed) };
                if self.exists(elem) {
                    return Err(Stop::Failed);
                }
                let mut replaced = Vec::with_capacity(items.len());
                for item in items {
                    self.tick()?;
                    self.locals.insert(elem.clone(), item);
                    let r = self.expr(expr);
                    self.locals.remove(elem);
                    match r? {
                        Data::List(_) => return Err(Stop::Failed),
                        v => replaced.push(v),
                    }
                }
                match self.locals.get_mut(list) {
                    Some(l) => *l = Data::List(replaced),
                    None => self.state.globals.get_mut(list).expect("checked").value = Data::List(replaced),
                }
                Ok(Status::Foreach)
            }
            Cmd::SetDelegation(d) => {
                for var in self.delegation_targets(d)? {
                    self.state.assertions.insert(Assertion { var, issuer: d.issuer.clone(), right: d.right, grantee: d.grantee.clone() });
                }
                Ok(Status::SetDelegation)
            }
            Cmd::DeleteDelegation(d) => {
                for var in self.delegation_targets(d)? {
                    self.state.assertions.remove(&Assertion { var, issuer: d.issuer.clone(), right: d.right, grantee: d.grantee.clone() });
                }
                Ok(Status::DeleteDelegation)
            }
            Cmd::DefaultDelegator(p) => {
                self.require_admin()?;
                if !self.state.principals.contains_key(p) {
                    return Err(Stop::Failed);
                }
                self.state.default_delegator = Some(p.clone());
                Ok(Status::DefaultDelegator)
            }
        }
    }
}

/// A server's in-memory state plus the variant deciding its behaviour.
#[derive(Clone, Debug)]
pub struct Interpreter {
    pub state: State,
    pub variant: Variant,
}

impl Interpreter {
    pub fn new(variant: Variant, admin_password: &str) -> Interpreter {
        Interpreter { state: State::new(admin_password), variant }
    }

    pub fn run_text(&mut self, text: &str, deadline: Option<Instant>) -> Outcome {
        match parse_program(text) {
            Ok(p) => self.run(&p, deadline),
            Err(_) => Outcome::Failed,
        }
    }

    pub fn run(&mut self, p: &Program, deadline: Option<Instant>) -> Outcome {
        let login = match self.state.password_matches(&p.principal, &p.password) {
            None => return Outcome::Failed,
            Some(ok) => ok || (self.variant == Variant::HardcodedPassword && p.principal == ADMIN && p.password == "admin"),
        };
        if !login {
            return Outcome::Denied(Denial::Login);
        }
        let mut exec = Exec { state: self.state.clone(), caller: &p.principal, locals: BTreeMap::new(), variant: self.variant, deadline };
        let result = (|| {
            let mut statuses = Vec::with_capacity(p.cmds.len() + 1);
            for c in &p.cmds {
                statuses.push(exec.cmd(c)?);
            }
            let exit = match &p.end {
                Terminator::Exit => {
                    exec.require_admin()?;
                    statuses.push(Status::Exiting);
                    true
                }
                Terminator::Return(e) => {
                    statuses.push(Status::Returning(exec.expr(e)?.to_json()));
                    false
                }
            };
            Ok((statuses, exit))
        })();
        match result {
            Ok((statuses, exit)) => {
                self.state = exec.state;
                Outcome::Done { statuses, exit }
            }
            Err(Stop::Denied(d)) => Outcome::Denied(d),
            Err(Stop::Failed) => Outcome::Failed,
            Err(Stop::Crash) => Outcome::Crashed,
            Err(Stop::Budget) => Outcome::OverBudget,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(i: &mut Interpreter, who: &str, pw: &str, body: &str) -> String {
        let text = format!("as principal {who} password \"{pw}\" do\n{body}\n***\n");
        i.run_text(&text, None).text().unwrap_or_else(|| "<dropped>".into())
    }

    fn oracle() -> Interpreter {
        Interpreter::new(Variant::Oracle, "admin")
    }

    #[test]
    fn admin_only_commands() {
        let mut i = oracle();
        run(&mut i, "admin", "admin", "create principal bob \"b\"\nreturn \"ok\"");
        assert_eq!(run(&mut i, "bob", "b", "create principal eve \"e\"\nreturn \"x\""), "{\"status\":\"DENIED\"}\n");
        assert_eq!(run(&mut i, "bob", "b", "default delegator = bob\nreturn \"x\""), "{\"status\":\"DENIED\"}\n");
        assert_eq!(run(&mut i, "bob", "b", "exit"), "{\"status\":\"DENIED\"}\n");
        assert_eq!(run(&mut i, "admin", "admin", "create principal bob \"c\"\nreturn \"x\""), "{\"status\":\"FAILED\"}\n");
        assert_eq!(run(&mut i, "admin", "admin", "exit"), "{\"status\":\"EXITING\"}\n");
    }

    #[test]
    fn login_errors() {
        let mut i = oracle();
        assert_eq!(run(&mut i, "admin", "nope", "return \"x\""), "{\"status\":\"DENIED\"}\n");
        assert_eq!(run(&mut i, "ghost", "admin", "return \"x\""), "{\"status\":\"FAILED\"}\n");
        let mut h = Interpreter::new(Variant::HardcodedPassword, "s3cret");
        assert_eq!(run(&mut h, "admin", "admin", "return \"x\""), "{\"status\":\"RETURNING\",\"output\":\"x\"}\n");
    }

    #[test]
    fn failures_roll_back_everything() {
        let mut i = oracle();
        let before = i.state.clone();
        assert_eq!(run(&mut i, "admin", "admin", "create principal bob \"b\"\nset x = \"1\"\nset y = missing\nreturn x"), "{\"status\":\"FAILED\"}\n");
        assert_eq!(i.state, before);
    }

    #[test]
    fn lists_records_and_foreach() {
        let mut i = oracle();
        let out = run(
            &mut i,
            "admin",
            "admin",
            "set l = []\nappend to l with \"a\"\nlocal r = { f = \"b\", g = \"c\" }\nappend to l with r\nlocal m = []\nappend to m with l\nappend to l with m\nreturn l",
        );
        assert_eq!(
            out.lines().last().unwrap(),
            r#"{"status":"RETURNING","output":["a",{"f":"b","g":"c"},"a",{"f":"b","g":"c"}]}"#
        );
        let out = run(&mut i, "admin", "admin", "set s = []\nappend to s with \"a\"\nappend to s with \"b\"\nforeach y in s replacewith y\nreturn s");
        assert!(out.ends_with("{\"status\":\"FOREACH\"}\n{\"status\":\"RETURNING\",\"output\":[\"a\",\"b\"]}\n"), "{out}");
        assert_eq!(run(&mut i, "admin", "admin", "foreach e in l replacewith e.f\nreturn l"), "{\"status\":\"FAILED\"}\n");
        assert_eq!(run(&mut i, "admin", "admin", "foreach l in s replacewith l\nreturn s"), "{\"status\":\"FAILED\"}\n");
        let out = run(&mut i, "admin", "admin", "local t = []\nappend to t with { f = \"1\" }\nforeach e in t replacewith e.f\nreturn t");
        assert!(out.ends_with("{\"status\":\"RETURNING\",\"output\":[\"1\"]}\n"), "{out}");
        assert_eq!(run(&mut i, "admin", "admin", "local x = { a = \"1\", a = \"2\" }\nreturn x"), "{\"status\":\"FAILED\"}\n");
        assert_eq!(run(&mut i, "admin", "admin", "set s = \"q\"\nappend to s with \"r\"\nreturn s"), "{\"status\":\"FAILED\"}\n");
    }

    #[test]
    fn locals_do_not_shadow() {
        let mut i = oracle();
        run(&mut i, "admin", "admin", "set g = \"1\"\nreturn g");
        assert_eq!(run(&mut i, "admin", "admin", "local g = \"2\"\nreturn g"), "{\"status\":\"FAILED\"}\n");
        let out = run(&mut i, "admin", "admin", "local k = \"2\"\nset k = \"3\"\nreturn k");
        assert_eq!(out, "{\"status\":\"LOCAL\"}\n{\"status\":\"SET\"}\n{\"status\":\"RETURNING\",\"output\":\"3\"}\n");
        assert!(!i.state.globals.contains_key("k"));
    }

    #[test]
    fn delegation_requires_the_delegate_right() {
        let mut i = oracle();
        run(&mut i, "admin", "admin", "create principal a \"a\"\ncreate principal b \"b\"\nset x = \"v\"\nset delegation x admin read -> a\nreturn x");
        assert_eq!(run(&mut i, "a", "a", "set delegation x a read -> b\nreturn \"x\""), "{\"status\":\"DENIED\"}\n");
        assert_eq!(run(&mut i, "b", "b", "set delegation x a read -> b\nreturn \"x\""), "{\"status\":\"DENIED\"}\n");
        let mut s = Interpreter::new(Variant::SkipDelegateCheck, "admin");
        run(&mut s, "admin", "admin", "create principal a \"a\"\ncreate principal b \"b\"\nset x = \"v\"\nset delegation x admin read -> a\nreturn x");
        assert_eq!(run(&mut s, "a", "a", "set delegation x a read -> b\nreturn \"x\""), "{\"status\":\"SET_DELEGATION\"}\n{\"status\":\"RETURNING\",\"output\":\"x\"}\n");
    }

    #[test]
    fn all_expands_over_existing_globals_only() {
        let mut i = oracle();
        run(&mut i, "admin", "admin", "create principal a \"a\"\ncreate principal b \"b\"\nset x = \"1\"\nset y = \"2\"\nreturn x");
        run(&mut i, "a", "a", "set mine = \"3\"\nset delegation all a read -> b\nreturn mine");
        assert_eq!(i.state.assertions.len(), 1);
        run(&mut i, "admin", "admin", "set z = \"4\"\nset delegation all admin write -> b\nreturn z");
        assert_eq!(i.state.assertions.len(), 5);
        assert_eq!(run(&mut i, "b", "b", "return x"), "{\"status\":\"DENIED\"}\n");
        run(&mut i, "admin", "admin", "delete delegation all admin write -> b\nreturn z");
        assert_eq!(i.state.assertions.len(), 1);
    }

    #[test]
    fn default_delegator_applies_at_creation() {
        let mut i = oracle();
        run(&mut i, "admin", "admin", "create principal a \"a\"\nset x = \"1\"\nset delegation x admin read -> a\nset delegation x admin delegate -> a\nreturn x");
        run(&mut i, "admin", "admin", "create principal early \"e\"\ndefault delegator = a\ncreate principal late \"l\"\nreturn x");
        assert_eq!(run(&mut i, "late", "l", "return x"), "{\"status\":\"RETURNING\",\"output\":\"1\"}\n");
        assert_eq!(run(&mut i, "early", "e", "return x"), "{\"status\":\"DENIED\"}\n");
        assert_eq!(run(&mut i, "late", "l", "set x = \"2\"\nreturn x"), "{\"status\":\"DENIED\"}\n");
    }

    #[test]
    fn crash_fixture_dies_on_empty_append() {
        let mut c = Interpreter::new(Variant::Crash, "admin");
        assert_eq!(c.run_text("as principal admin password \"admin\" do\nset l = []\nappend to l with []\nreturn l\n***", None), Outcome::Crashed);
        let mut o = oracle();
        assert_eq!(
            run(&mut o, "admin", "admin", "set l = []\nappend to l with []\nreturn l").lines().last().unwrap(),
            "{\"status\":\"RETURNING\",\"output\":[]}"
        );
    }

    #[test]
    fn budget_is_enforced() {
        let mut i = oracle();
        let past = Instant::now() - std::time::Duration::from_secs(1);
        assert_eq!(i.run_text("as principal admin password \"admin\" do\nset x = \"1\"\nreturn x\n***", Some(past)), Outcome::OverBudget);
        assert!(i.state.globals.is_empty());
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>(), Ok(v));
        }
    }
}
