use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::ast::Right;

pub const ADMIN: &str = "admin";

/// A runtime value.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Data {
    Str(String),
    List(Vec<Data>),
    /// Fields in the order they were written.
    Record(Vec<(String, String)>),
}

impl Data {
    /// JSON rendering used for `RETURNING` output.
    pub fn to_json(&self) -> String {
        let mut out = String::new();
        self.write_json(&mut out);
        out
    }

    fn write_json(&self, out: &mut String) {
        let quote = |s: &str| serde_json::to_string(s).expect("string serializes");
        match self {
            Data::Str(s) => out.push_str(&quote(s)),
            Data::List(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    item.write_json(out);
                }
                out.push(']');
            }
            Data::Record(fields) => {
                out.push('{');
                for (i, (k, v)) in fields.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push_str(&quote(k));
                    out.push(':');
                    out.push_str(&quote(v));
                }
                out.push('}');
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Global {
    pub value: Data,
    pub owner: String,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Assertion {
    pub var: String,
    pub issuer: String,
    pub right: Right,
    pub grantee: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct State {
    /// Principal name to hex SHA-256 of the password.
    pub principals: BTreeMap<String, String>,
    pub globals: BTreeMap<String, Global>,
    pub assertions: BTreeSet<Assertion>,
    /// `None` until `default delegator = p` runs; no inheritance happens before that.
    pub default_delegator: Option<String>,
}

pub fn password_hash(password: &str) -> String {
    hex::encode(Sha256::digest(password.as_bytes()))
}

impl State {
    pub fn new(admin_password: &str) -> State {
        State {
            principals: BTreeMap::from([(ADMIN.to_string(), password_hash(admin_password))]),
            globals: BTreeMap::new(),
            assertions: BTreeSet::new(),
            default_delegator: None,
        }
    }

    pub fn password_matches(&self, principal: &str, password: &str) -> Option<bool> {
        self.principals.get(principal).map(|h| *h == password_hash(password))
    }

    /// Hex SHA-256 of a canonical serialization, for comparing runs.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("state serializes")))
    }

    /// Whether `principal` holds `right` on global `var`: admin, the owner, or
    /// anyone reachable from them along `right`-labelled assertions on `var`.
    pub fn check_right(&self, principal: &str, right: Right, var: &str) -> bool {
        let Some(g) = self.globals.get(var) else { return false };
        if principal == ADMIN || principal == g.owner {
            return true;
        }
        let mut seen: BTreeSet<&str> = BTreeSet::from([ADMIN, g.owner.as_str()]);
        let mut frontier: Vec<&str> = seen.iter().copied().collect();
        while let Some(q) = frontier.pop() {
            for a in self.assertions.iter().filter(|a| a.var == var && a.right == right && a.issuer == q) {
                if a.grantee == principal {
                    return true;
                }
                if seen.insert(&a.grantee) {
                    frontier.push(&a.grantee);
                }
            }
        }
        false
    }

    /// The flawed check that trusts any edge without following it back to a root.
    pub fn check_right_unchained(&self, principal: &str, right: Right, var: &str) -> bool {
        let Some(g) = self.globals.get(var) else { return false };
        principal == ADMIN
            || principal == g.owner
            || self.assertions.iter().any(|a| a.var == var && a.right == right && a.grantee == principal)
    }
}
