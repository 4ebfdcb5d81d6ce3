use std::path::Path;
use std::sync::Arc;

use crate::artifacts::Artifacts;
use crate::sandbox::{Background, IsolationProvider, Limits, RunRequest, RunResult, Sandbox};
use crate::RunnerError;

/// One sandbox kept alive across several invocations of a target's
/// executables, so files written by one run are visible to the next.
/// The sandbox is destroyed on drop.
pub struct Session {
    provider: Arc<dyn IsolationProvider>,
    sandbox: Option<Sandbox>,
    artifacts: Artifacts,
    limits: Limits,
}

impl Session {
    pub fn open(provider: Arc<dyn IsolationProvider>, artifacts: Artifacts) -> Result<Self, RunnerError> {
        let sandbox = provider.provision()?;
        Ok(Session { provider, sandbox: Some(sandbox), artifacts, limits: Limits::test() })
    }

    pub fn with_limits(mut self, limits: Limits) -> Self {
        self.limits = limits;
        self
    }

    pub fn dir(&self) -> &Path {
        self.sandbox().path()
    }

    pub fn artifacts(&self) -> &Artifacts {
        &self.artifacts
    }

    pub fn provider(&self) -> &Arc<dyn IsolationProvider> {
        &self.provider
    }

    fn sandbox(&self) -> &Sandbox {
        self.sandbox.as_ref().expect("sandbox held until drop")
    }

    fn request(&self, program: &str, args: &[String], stdin: &[u8]) -> Result<RunRequest, RunnerError> {
        Ok(RunRequest::new(self.artifacts.path(program)?).args(args).stdin(stdin.to_vec()).limits(self.limits.clone()))
    }

    pub fn run(&self, program: &str, args: &[String]) -> Result<RunResult, RunnerError> {
        self.run_with_stdin(program, args, &[])
    }

    pub fn run_with_stdin(&self, program: &str, args: &[String], stdin: &[u8]) -> Result<RunResult, RunnerError> {
        let req = self.request(program, args, stdin)?;
        self.provider.execute(self.sandbox(), &req)
    }

    /// Starts a long-running program. `limits.wall` is ignored.
    pub fn spawn(&self, program: &str, args: &[String]) -> Result<Background, RunnerError> {
        let req = self.request(program, args, &[])?;
        self.provider.spawn(self.sandbox(), &req)
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        if let Some(sb) = self.sandbox.take() {
            self.provider.destroy(sb);
        }
    }
}
