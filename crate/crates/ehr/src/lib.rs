//! The access-controlled data server: parser, transactional interpreter,
//! TCP front end, seeded program generator and break classification.

pub mod ast;
pub mod gen;
pub mod interp;
pub mod judge;
pub mod parse;
pub mod problem;
pub mod server;
pub mod state;

pub use ast::{Cmd, Expr, Program, Right, Target, Terminator, Value};
pub use interp::{Denial, Interpreter, Outcome, Status, Variant};
pub use parse::{parse_program, ParseError};
pub use state::{Data, State, ADMIN};
pub use judge::{adjudicate, judge_break, run_oracle, BreakTest, EhrError, EhrTarget, EhrVerdict, InProcessTarget, ServerTarget};
