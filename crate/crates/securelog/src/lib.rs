//! Reference `logappend`/`logread` for the gallery log problem, its flawed
//! variants, and the privacy/integrity break judges.

pub mod attacks;
pub mod cli;
pub mod codec;
pub mod gen;
pub mod judge;
pub mod model;
pub mod problem;
pub mod query;

pub use cli::{logappend, logread, AppendArgs, Output, ReadArgs, Variant};
pub use judge::{
    generate_challenge_logs, judge_integrity, judge_privacy, Challenge, InProcess, Invocation, JudgeError, LogTarget,
    Program,
};
pub use model::{Action, Event, GalleryState, Kind, Person};
pub use query::Query;
