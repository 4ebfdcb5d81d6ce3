use serde::{Deserialize, Serialize};

/// Outcome of adjudicating one break attempt against one target.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "judgement", rename_all = "kebab-case")]
pub enum Judgement {
    Confirmed { evidence: String },
    Rejected { reason: String },
    /// The target crashed while being judged; usable as crash evidence.
    Crash { evidence: String },
    /// The attempt broke a rule of engagement (e.g. a MITM that stalls the client).
    Disallowed { reason: String },
}

impl Judgement {
    pub fn confirmed(evidence: impl Into<String>) -> Self {
        Judgement::Confirmed { evidence: evidence.into() }
    }

    pub fn rejected(reason: impl Into<String>) -> Self {
        Judgement::Rejected { reason: reason.into() }
    }

    pub fn crash(evidence: impl Into<String>) -> Self {
        Judgement::Crash { evidence: evidence.into() }
    }

    pub fn disallowed(reason: impl Into<String>) -> Self {
        Judgement::Disallowed { reason: reason.into() }
    }

    pub fn is_confirmed(&self) -> bool {
        matches!(self, Judgement::Confirmed { .. })
    }
}
