//! Line-oriented tokenizer and recursive-descent parser for the command language.

use thiserror::Error;

use crate::ast::{Cmd, Delegation, Expr, Program, Right, Target, Terminator, Value};

pub const MAX_STRING: usize = 65_535;
pub const MAX_IDENT: usize = 255;

pub const KEYWORDS: &[&str] = &[
    "all", "append", "as", "change", "create", "default", "delegate", "delegation", "delegator", "delete", "do", "exit",
    "foreach", "in", "local", "password", "principal", "read", "replacewith", "return", "set", "to", "with", "write",
];

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub msg: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Word(String),
    Str(String),
    Sym(&'static str),
}

fn tokenize(line: &str, n: usize) -> Result<Vec<Tok>, ParseError> {
    let err = |msg: String| ParseError { line: n, msg };
    let bytes = line.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\r' => i += 1,
            b'"' => {
                let start = i + 1;
                let Some(len) = bytes[start..].iter().position(|&b| b == b'"') else {
                    return Err(err("unterminated string".into()));
                };
                let s = &line[start..start + len];
                if len > MAX_STRING {
                    return Err(err("string too long".into()));
                }
                if !s.bytes().all(|b| (0x20..0x7f).contains(&b)) {
                    return Err(err("non-printable character in string".into()));
                }
                toks.push(Tok::Str(s.to_string()));
                i = start + len + 1;
            }
            b'A'..=b'Z' | b'a'..=b'z' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                if i - start > MAX_IDENT {
                    return Err(err("identifier too long".into()));
                }
                toks.push(Tok::Word(line[start..i].to_string()));
            }
            b'-' if bytes.get(i + 1) == Some(&b'>') => {
                toks.push(Tok::Sym("->"));
                i += 2;
            }
            b'=' | b',' | b'.' | b'{' | b'}' | b'[' | b']' => {
                toks.push(Tok::Sym(match c {
                    b'=' => "=",
                    b',' => ",",
                    b'.' => ".",
                    b'{' => "{",
                    b'}' => "}",
                    b'[' => "[",
                    _ => "]",
                }));
                i += 1;
            }
            _ => return Err(err(format!("unexpected character {:?}", c as char))),
        }
    }
    Ok(toks)
}

struct Line {
    toks: Vec<Tok>,
    pos: usize,
    n: usize,
}

impl Line {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { line: self.n, msg: msg.into() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match self.next() {
            Some(Tok::Word(w)) if w == kw => Ok(()),
            other => self.err(format!("expected `{kw}`, found {other:?}")),
        }
    }

    fn sym(&mut self, s: &str) -> Result<(), ParseError> {
        match self.next() {
            Some(Tok::Sym(t)) if t == s => Ok(()),
            other => self.err(format!("expected `{s}`, found {other:?}")),
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.next() {
            Some(Tok::Word(w)) if !KEYWORDS.contains(&w.as_str()) => Ok(w),
            other => self.err(format!("expected identifier, found {other:?}")),
        }
    }

    fn string(&mut self) -> Result<String, ParseError> {
        match self.next() {
            Some(Tok::Str(s)) => Ok(s),
            other => self.err(format!("expected string, found {other:?}")),
        }
    }

    fn end(&self) -> Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(t) => self.err(format!("trailing {t:?}")),
        }
    }

    fn value(&mut self) -> Result<Value, ParseError> {
        if let Some(Tok::Str(_)) = self.peek() {
            return Ok(Value::Str(self.string()?));
        }
        let x = self.ident()?;
        if self.peek() == Some(&Tok::Sym(".")) {
            self.pos += 1;
            return Ok(Value::Field(x, self.ident()?));
        }
        Ok(Value::Var(x))
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(Tok::Sym("[")) => {
                self.pos += 1;
                self.sym("]")?;
                Ok(Expr::EmptyList)
            }
            Some(Tok::Sym("{")) => {
                self.pos += 1;
                let mut fields = Vec::new();
                loop {
                    let name = self.ident()?;
                    self.sym("=")?;
                    fields.push((name, self.value()?));
                    match self.next() {
                        Some(Tok::Sym(",")) => continue,
                        Some(Tok::Sym("}")) => break,
                        other => return self.err(format!("expected `,` or `}}`, found {other:?}")),
                    }
                }
                Ok(Expr::Record(fields))
            }
            _ => Ok(Expr::Value(self.value()?)),
        }
    }

    fn right(&mut self) -> Result<Right, ParseError> {
        match self.next() {
            Some(Tok::Word(w)) => match Right::ALL.into_iter().find(|r| r.keyword() == w) {
                Some(r) => Ok(r),
                None => self.err(format!("expected right, found {w}")),
            },
            other => self.err(format!("expected right, found {other:?}")),
        }
    }

    fn delegation(&mut self) -> Result<Delegation, ParseError> {
        let target = match self.peek() {
            Some(Tok::Word(w)) if w == "all" => {
                self.pos += 1;
                Target::All
            }
            _ => Target::Var(self.ident()?),
        };
        let issuer = self.ident()?;
        let right = self.right()?;
        self.sym("->")?;
        let grantee = self.ident()?;
        Ok(Delegation { target, issuer, right, grantee })
    }

    fn word_at(&self, i: usize) -> Option<&str> {
        match self.toks.get(i) {
            Some(Tok::Word(w)) => Some(w),
            _ => None,
        }
    }

    fn prim(&mut self) -> Result<Cmd, ParseError> {
        let cmd = match (self.word_at(0), self.word_at(1)) {
            (Some("create"), _) => {
                self.pos = 1;
                self.keyword("principal")?;
                Cmd::CreatePrincipal { name: self.ident()?, password: self.string()? }
            }
            (Some("change"), _) => {
                self.pos = 1;
                self.keyword("password")?;
                Cmd::ChangePassword { name: self.ident()?, password: self.string()? }
            }
            (Some("set"), Some("delegation")) => {
                self.pos = 2;
                Cmd::SetDelegation(self.delegation()?)
            }
            (Some("set"), _) => {
                self.pos = 1;
                let var = self.ident()?;
                self.sym("=")?;
                Cmd::Set { var, expr: self.expr()? }
            }
            (Some("append"), _) => {
                self.pos = 1;
                self.keyword("to")?;
                let var = self.ident()?;
                self.keyword("with")?;
                Cmd::Append { var, expr: self.expr()? }
            }
            (Some("local"), _) => {
                self.pos = 1;
                let var = self.ident()?;
                self.sym("=")?;
                Cmd::Local { var, expr: self.expr()? }
            }
            (Some("foreach"), _) => {
                self.pos = 1;
                let elem = self.ident()?;
                self.keyword("in")?;
                let list = self.ident()?;
                self.keyword("replacewith")?;
                Cmd::Foreach { elem, list, expr: self.expr()? }
            }
            (Some("delete"), _) => {
                self.pos = 1;
                self.keyword("delegation")?;
                Cmd::DeleteDelegation(self.delegation()?)
            }
            (Some("default"), _) => {
                self.pos = 1;
                self.keyword("delegator")?;
                self.sym("=")?;
                Cmd::DefaultDelegator(self.ident()?)
            }
            _ => return self.err("unknown command"),
        };
        self.end()?;
        Ok(cmd)
    }
}

/// Parses one program. Text after the `***` line may only be whitespace.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut lines = text.split('\n').enumerate().map(|(i, l)| (i + 1, l));
    let (n, header) = lines.next().unwrap_or((1, ""));
    let mut h = Line { toks: tokenize(header, n)?, pos: 0, n };
    h.keyword("as")?;
    h.keyword("principal")?;
    let principal = h.ident()?;
    h.keyword("password")?;
    let password = h.string()?;
    h.keyword("do")?;
    h.end()?;

    let mut cmds = Vec::new();
    let end = loop {
        let Some((n, raw)) = lines.next() else {
            return Err(ParseError { line: n, msg: "missing exit or return".into() });
        };
        let mut l = Line { toks: tokenize(raw, n)?, pos: 0, n };
        match l.word_at(0) {
            Some("exit") => {
                l.pos = 1;
                l.end()?;
                break Terminator::Exit;
            }
            Some("return") => {
                l.pos = 1;
                let e = l.expr()?;
                l.end()?;
                break Terminator::Return(e);
            }
            _ => cmds.push(l.prim()?),
        }
    };
    let Some((n, stars)) = lines.next() else {
        return Err(ParseError { line: 0, msg: "missing ***".into() });
    };
    if stars.trim_matches([' ', '\t', '\r']) != "***" {
        return Err(ParseError { line: n, msg: "expected ***".into() });
    }
    if let Some((n, _)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(ParseError { line: n, msg: "text after ***".into() });
    }
    Ok(Program { principal, password, cmds, end })
}
