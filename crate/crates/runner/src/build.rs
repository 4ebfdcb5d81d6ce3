use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::artifacts::{copy_tree, Artifacts};
use crate::sandbox::{IsolationProvider, Limits, RunRequest, Verdict};
use crate::RunnerError;

/// Name of the build entry point at the bundle root.
pub const BUILD_ENTRY: &str = "build";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum BuildFailure {
    NoEntryPoint,
    Timeout,
    Exit { code: Option<i32>, signal: Option<i32> },
    MissingArtifact { name: String },
}

#[derive(Debug)]
pub struct BuildResult {
    pub outcome: Result<Artifacts, BuildFailure>,
    pub log: String,
}

impl BuildResult {
    pub fn ok(&self) -> bool {
        self.outcome.is_ok()
    }
}

/// Builds a submission bundle in a fresh sandbox and collects `artifacts`.
pub fn run_build<P: IsolationProvider + ?Sized>(
    bundle: &Path,
    artifacts: &[String],
    provider: &P,
) -> Result<BuildResult, RunnerError> {
    run_build_with_timeout(bundle, artifacts, provider, Limits::BUILD_WALL)
}

pub fn run_build_with_timeout<P: IsolationProvider + ?Sized>(
    bundle: &Path,
    artifacts: &[String],
    provider: &P,
    timeout: Duration,
) -> Result<BuildResult, RunnerError> {
    if !bundle.join(BUILD_ENTRY).is_file() {
        return Ok(BuildResult { outcome: Err(BuildFailure::NoEntryPoint), log: String::new() });
    }
    let sandbox = provider.provision()?;
    let result = (|| {
        copy_tree(bundle, sandbox.path()).map_err(|e| RunnerError::Sandbox(format!("copying bundle: {e}")))?;
        let mut limits = Limits::build().with_wall(timeout);
        limits.cpu_seconds = timeout.as_secs().max(1);
        let req = RunRequest::new(format!("./{BUILD_ENTRY}")).limits(limits);
        let res = provider.execute(&sandbox, &req)?;
        let log = format!("{}{}", res.stdout_str(), String::from_utf8_lossy(&res.stderr));
        let outcome = if res.verdict == Verdict::Timeout {
            Err(BuildFailure::Timeout)
        } else if !res.succeeded() {
            Err(BuildFailure::Exit { code: res.exit_code, signal: res.signal })
        } else {
            match Artifacts::collect(sandbox.path(), artifacts) {
                Ok(a) => Ok(a),
                Err(RunnerError::MissingArtifact(name)) => Err(BuildFailure::MissingArtifact { name }),
                Err(e) => return Err(e),
            }
        };
        Ok(BuildResult { outcome, log })
    })();
    provider.destroy(sandbox);
    result
}
