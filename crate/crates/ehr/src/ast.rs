use std::fmt;

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Right {
    Read,
    Write,
    Append,
    Delegate,
}

impl Right {
    pub const ALL: [Right; 4] = [Right::Read, Right::Write, Right::Append, Right::Delegate];

    pub fn keyword(self) -> &'static str {
        match self {
            Right::Read => "read",
            Right::Write => "write",
            Right::Append => "append",
            Right::Delegate => "delegate",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Var(String),
    Field(String, String),
    Str(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Value(Value),
    EmptyList,
    Record(Vec<(String, Value)>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Target {
    All,
    Var(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Delegation {
    pub target: Target,
    pub issuer: String,
    pub right: Right,
    pub grantee: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Cmd {
    CreatePrincipal { name: String, password: String },
    ChangePassword { name: String, password: String },
    Set { var: String, expr: Expr },
    Append { var: String, expr: Expr },
    Local { var: String, expr: Expr },
    Foreach { elem: String, list: String, expr: Expr },
    SetDelegation(Delegation),
    DeleteDelegation(Delegation),
    DefaultDelegator(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Terminator {
    Exit,
    Return(Expr),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub principal: String,
    pub password: String,
    pub cmds: Vec<Cmd>,
    pub end: Terminator,
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Var(x) => f.write_str(x),
            Value::Field(x, y) => write!(f, "{x}.{y}"),
            Value::Str(s) => write!(f, "\"{s}\""),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Value(v) => v.fmt(f),
            Expr::EmptyList => f.write_str("[]"),
            Expr::Record(fields) => {
                f.write_str("{")?;
                for (i, (name, v)) in fields.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, " {name} = {v}")?;
                }
                f.write_str(" }")
            }
        }
    }
}

impl fmt::Display for Delegation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let target = match &self.target {
            Target::All => "all",
            Target::Var(x) => x,
        };
        write!(f, "{target} {} {} -> {}", self.issuer, self.right.keyword(), self.grantee)
    }
}

impl fmt::Display for Cmd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cmd::CreatePrincipal { name, password } => write!(f, "create principal {name} \"{password}\""),
            Cmd::ChangePassword { name, password } => write!(f, "change password {name} \"{password}\""),
            Cmd::Set { var, expr } => write!(f, "set {var} = {expr}"),
            Cmd::Append { var, expr } => write!(f, "append to {var} with {expr}"),
            Cmd::Local { var, expr } => write!(f, "local {var} = {expr}"),
            Cmd::Foreach { elem, list, expr } => write!(f, "foreach {elem} in {list} replacewith {expr}"),
            Cmd::SetDelegation(d) => write!(f, "set delegation {d}"),
            Cmd::DeleteDelegation(d) => write!(f, "delete delegation {d}"),
            Cmd::DefaultDelegator(p) => write!(f, "default delegator = {p}"),
        }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "as principal {} password \"{}\" do", self.principal, self.password)?;
        for c in &self.cmds {
            writeln!(f, "   {c}")?;
        }
        match &self.end {
            Terminator::Exit => writeln!(f, "   exit")?,
            Terminator::Return(e) => writeln!(f, "   return {e}")?,
        }
        writeln!(f, "***")
    }
}
