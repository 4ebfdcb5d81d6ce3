//! Builds and tests untrusted submissions inside an isolation provider.

pub mod archive;
pub mod artifacts;
pub mod build;
pub mod evaluate;
pub mod judgement;
pub mod plugin;
pub mod ports;
pub mod problem;
pub mod sandbox;
pub mod session;
pub mod testing;

use std::path::PathBuf;

pub use artifacts::Artifacts;
pub use build::{run_build, run_build_with_timeout, BuildFailure, BuildResult, BUILD_ENTRY};
pub use evaluate::{evaluate_artifacts, evaluate_submission, Evaluation};
pub use judgement::Judgement;
pub use plugin::{run_plugin, serve_plugin, PluginVerdict, RunManifest};
pub use ports::{allocate_ports, is_listening};
pub use problem::{Measure, ProblemDescriptor, Ready, Step, TestClass, TestDescriptor};
pub use sandbox::{
    is_crash_signal, landlock_available, with_sandbox, Background, IsolationProvider, Limits, LocalProvider,
    NetworkPolicy, RunRequest, RunResult, Sandbox, Verdict,
};
pub use session::Session;
pub use testing::{exchange, outputs_match, run_test, run_test_with_ports, TestOutcome};

#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    #[error("sandbox fault: {0}")]
    Sandbox(String),
    #[error("cannot start {program:?}: {source}")]
    Spawn {
        program: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid problem descriptor: {0}")]
    Descriptor(String),
    #[error("missing artifact {0:?}")]
    MissingArtifact(String),
    #[error("build failed: {failure:?}")]
    BuildFailed { failure: BuildFailure, log: String },
    #[error("plugin: {0}")]
    Plugin(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
