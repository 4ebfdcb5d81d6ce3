//! Bearer tokens, the authorization policy table and the phase gates.

use bibifi_scoring::TeamId;
use rand::RngCore;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Phase;

/// 128 random bits, hex encoded.
pub fn new_token() -> String {
    let mut b = [0u8; 16];
    rand::rng().fill_bytes(&mut b);
    hex::encode(b)
}

pub fn hash_token(token: &str) -> String {
    hex::encode(Sha256::digest(token.as_bytes()))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, thiserror::Error)]
#[error("{status}: {message}")]
pub struct ApiError {
    pub status: u16,
    pub message: String,
}

impl ApiError {
    pub fn new(status: u16, message: impl Into<String>) -> Self {
        ApiError { status, message: message.into() }
    }
    pub fn unauthorized() -> Self {
        Self::new(401, "missing or unknown token")
    }
    pub fn forbidden(m: impl Into<String>) -> Self {
        Self::new(403, m)
    }
    pub fn not_found(m: impl Into<String>) -> Self {
        Self::new(404, m)
    }
    pub fn conflict(m: impl Into<String>) -> Self {
        Self::new(409, m)
    }
    pub fn unprocessable(m: impl Into<String>) -> Self {
        Self::new(422, m)
    }
    pub fn internal(m: impl Into<String>) -> Self {
        Self::new(500, m)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Caller {
    Anonymous,
    Team(TeamId),
    Admin,
}

/// Every operation the API exposes, with the owner of the resource touched.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Action {
    RegisterTeam,
    Submit,
    ReadSubmission { owner: TeamId },
    ListTargets,
    ReadChallenges,
    SubmitBreak,
    ReadBreak { breaker: TeamId, target: TeamId, accepted: bool },
    ReadOwnReports,
    SubmitFix,
    ReadFix { builder: TeamId },
    ReadScoreboard { hidden: bool },
    ReadEvents,
    SetPhase,
    ReviewFixes,
    DecideFix,
    ReadOracleBugs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Who {
    Anyone,
    AnyTeam,
    Owner,
    AdminOnly,
    OwnerOrAdmin,
}

impl Action {
    fn who(&self, caller: &Caller) -> Who {
        use Action::*;
        match self {
            RegisterTeam | ReadEvents => Who::Anyone,
            ReadScoreboard { hidden: false } => Who::Anyone,
            ReadScoreboard { hidden: true } => Who::AdminOnly,
            Submit | ListTargets | ReadChallenges | SubmitBreak | SubmitFix | ReadOwnReports => Who::AnyTeam,
            ReadSubmission { owner } | ReadFix { builder: owner } => {
                if *caller == Caller::Team(owner.clone()) { Who::Owner } else { Who::OwnerOrAdmin }
            }
            ReadBreak { breaker, target, accepted } => match caller {
                Caller::Team(t) if t == breaker || (t == target && *accepted) => Who::Owner,
                _ => Who::OwnerOrAdmin,
            },
            SetPhase | ReviewFixes | DecideFix | ReadOracleBugs => Who::AdminOnly,
        }
    }

    /// Phases in which the action may run; `None` means any.
    pub fn phases(&self) -> Option<&'static [Phase]> {
        use Action::*;
        match self {
            RegisterTeam => Some(&[Phase::Registration, Phase::Build]),
            Submit => Some(&[Phase::Build]),
            ListTargets | ReadChallenges | SubmitBreak => Some(&[Phase::Break]),
            SubmitFix => Some(&[Phase::Fix]),
            _ => None,
        }
    }
}

/// The policy table. `Owner` here means the caller is the owning team; an
/// `OwnerOrAdmin` rule reached by a team therefore denies it.
pub fn authorize(caller: &Caller, action: &Action) -> Result<(), ApiError> {
    let who = action.who(caller);
    match (who, caller) {
        (Who::Anyone, _) => Ok(()),
        (_, Caller::Anonymous) => Err(ApiError::unauthorized()),
        (Who::AnyTeam, Caller::Team(_)) | (Who::Owner, Caller::Team(_)) => Ok(()),
        (Who::AnyTeam, Caller::Admin) => Err(ApiError::forbidden("only teams may do this")),
        (Who::AdminOnly | Who::OwnerOrAdmin | Who::Owner, Caller::Admin) => Ok(()),
        (Who::AdminOnly, Caller::Team(_)) => Err(ApiError::forbidden("admin only")),
        (Who::OwnerOrAdmin, Caller::Team(_)) => Err(ApiError::forbidden("not yours")),
    }
}

pub fn gate(action: &Action, phase: Phase) -> Result<(), ApiError> {
    match action.phases() {
        Some(ok) if !ok.contains(&phase) => Err(ApiError::conflict(format!("not allowed in the {phase} phase"))),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_are_128_bit_and_distinct() {
        let a = new_token();
        assert_eq!(a.len(), 32);
        assert_ne!(a, new_token());
        assert_eq!(hash_token(&a).len(), 64);
    }
}
