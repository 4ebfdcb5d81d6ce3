//! Contest service: an append-only event log folded into contest state, the
//! phase machine, team tokens and authorization, and the HTTP API.

pub mod api;
pub mod auth;
pub mod backend;
pub mod client;
pub mod config;
pub mod contest;
pub mod event;
pub mod state;
pub mod store;

pub use auth::{ApiError, Caller};
pub use backend::{Backend, Evaluated, PublicChallenge, RunnerBackend};
pub use config::{ContestConfig, Phase, Schedule, Window};
pub use contest::{Clock, Contest, ManualClock, SystemClock};
pub use event::{Event, EventRecord, JudgeDecision};
pub use state::{BoardRow, Scoreboard, State};
pub use store::Store;
