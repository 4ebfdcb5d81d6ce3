//! Reference `atm`/`bank` pair, its flawed variants, the MITM command
//! server and the integrity/privacy judges.

pub mod bank;
pub mod cli;
pub mod currency;
pub mod harness;
pub mod mitm;
pub mod pair;
pub mod problem;
pub mod wire;

pub use bank::{Bank, Op, Request, Response};
pub use currency::{Amount, MAX_AMOUNT};
pub use harness::{
    judge_integrity_mitm, judge_privacy_mitm, Mitm, MitmPorts, MitmTranscript, ProcessMitm, Secrets,
};
pub use pair::{AtmError, AtmPair, AtmRun, InProcessPair, SessionPair};
pub use wire::Flavor;
