//! Isolation providers.
//!
//! A provider hands out [`Sandbox`]es (a private working directory) and runs
//! processes confined to them. [`LocalProvider`] is the desk-scale backend:
//! a subprocess with rlimits, its own session, a scrubbed environment and,
//! when the kernel supports it, a Landlock domain that makes everything
//! outside the sandbox read-only and allows TCP only on harness-allocated
//! loopback ports. A container or VM backend implements the same trait.

use std::ffi::OsString;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, ExitStatus, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{mpsc, Arc, Mutex, OnceLock};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use landlock::{
    path_beneath_rules, Access, AccessFs, AccessNet, CompatLevel, Compatible, NetPort, Ruleset, RulesetAttr,
    RulesetCreated, RulesetCreatedAttr, RulesetStatus, Scope, ABI,
};
use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use crate::RunnerError;

/// Captured output is truncated past this many bytes per stream.
const OUTPUT_CAP: usize = 16 << 20;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum NetworkPolicy {
    /// No sockets at all beyond what the kernel cannot filter (see crate docs).
    None,
    /// TCP bind/connect only on these loopback ports.
    Loopback { ports: Vec<u16> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    pub cpu_seconds: u64,
    pub wall: Duration,
    pub memory_bytes: u64,
    pub network: NetworkPolicy,
}

impl Limits {
    pub const BUILD_WALL: Duration = Duration::from_secs(600);
    pub const TEST_WALL: Duration = Duration::from_secs(30);
    pub const MEMORY: u64 = 1 << 30;

    pub fn build() -> Self {
        Limits {
            cpu_seconds: Self::BUILD_WALL.as_secs(),
            wall: Self::BUILD_WALL,
            memory_bytes: Self::MEMORY,
            network: NetworkPolicy::None,
        }
    }

    pub fn test() -> Self {
        Limits {
            cpu_seconds: Self::TEST_WALL.as_secs(),
            wall: Self::TEST_WALL,
            memory_bytes: Self::MEMORY,
            network: NetworkPolicy::None,
        }
    }

    pub fn with_wall(mut self, wall: Duration) -> Self {
        self.wall = wall;
        self.cpu_seconds = self.cpu_seconds.min(wall.as_secs().max(1));
        self
    }

    pub fn with_ports(mut self, ports: &[u16]) -> Self {
        self.network = NetworkPolicy::Loopback { ports: ports.to_vec() };
        self
    }
}

#[derive(Clone, Debug)]
pub struct RunRequest {
    /// Absolute path, or a path relative to the sandbox directory.
    pub program: PathBuf,
    pub args: Vec<OsString>,
    pub stdin: Vec<u8>,
    pub env: Vec<(String, String)>,
    pub limits: Limits,
}

impl RunRequest {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        RunRequest {
            program: program.into(),
            args: Vec::new(),
            stdin: Vec::new(),
            env: Vec::new(),
            limits: Limits::test(),
        }
    }

    pub fn args<I, S>(mut self, args: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<OsString>,
    {
        self.args.extend(args.into_iter().map(Into::into));
        self
    }

    pub fn stdin(mut self, bytes: impl Into<Vec<u8>>) -> Self {
        self.stdin = bytes.into();
        self
    }

    pub fn limits(mut self, limits: Limits) -> Self {
        self.limits = limits;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Ok,
    Timeout,
    Crashed,
    ResourceExceeded,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunResult {
    pub exit_code: Option<i32>,
    pub signal: Option<i32>,
    pub stdout: Vec<u8>,
    pub stderr: Vec<u8>,
    pub wall_time: Duration,
    pub verdict: Verdict,
}

impl RunResult {
    pub fn stdout_str(&self) -> String {
        String::from_utf8_lossy(&self.stdout).into_owned()
    }

    pub fn succeeded(&self) -> bool {
        self.verdict == Verdict::Ok && self.exit_code == Some(0)
    }
}

/// Whether stderr carries the errno text a confinement denial produces.
pub fn mentions_denial(stderr: &[u8]) -> bool {
    let text = String::from_utf8_lossy(stderr);
    ["Permission denied", "Operation not permitted", "Read-only file system"].iter().any(|m| text.contains(m))
}

/// Signals that indicate the process itself faulted (memory errors, abort).
pub fn is_crash_signal(sig: i32) -> bool {
    matches!(sig, libc::SIGSEGV | libc::SIGBUS | libc::SIGABRT | libc::SIGILL | libc::SIGFPE | libc::SIGSYS)
}

fn classify(status: ExitStatus, timed_out: bool) -> (Option<i32>, Option<i32>, Verdict) {
    let code = status.code();
    let signal = status.signal();
    let verdict = if timed_out {
        Verdict::Timeout
    } else {
        match signal {
            Some(s) if is_crash_signal(s) => Verdict::Crashed,
            Some(libc::SIGXCPU) | Some(libc::SIGXFSZ) | Some(libc::SIGKILL) => Verdict::ResourceExceeded,
            _ => Verdict::Ok,
        }
    };
    (code, signal, verdict)
}

/// A private working directory. Dropping it deletes the directory.
#[derive(Debug)]
pub struct Sandbox {
    id: u64,
    dir: tempfile::TempDir,
}

impl Sandbox {
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn write_file(&self, rel: impl AsRef<Path>, bytes: &[u8]) -> io::Result<PathBuf> {
        let path = self.path().join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, bytes)?;
        Ok(path)
    }

    pub fn read_file(&self, rel: impl AsRef<Path>) -> io::Result<Vec<u8>> {
        std::fs::read(self.path().join(rel))
    }

    pub fn exists(&self, rel: impl AsRef<Path>) -> bool {
        self.path().join(rel).exists()
    }
}

/// A process left running in a sandbox (servers, proxies).
pub struct Background {
    child: Child,
    started: Instant,
    lines: mpsc::Receiver<String>,
    stdout: Arc<Mutex<Vec<u8>>>,
    stderr: Arc<Mutex<Vec<u8>>>,
    readers: Vec<JoinHandle<()>>,
}

impl Background {
    pub fn pid(&self) -> u32 {
        self.child.id()
    }

    /// Waits until the process prints a stdout line satisfying `pred`.
    pub fn wait_for_line(&mut self, timeout: Duration, pred: impl Fn(&str) -> bool) -> bool {
        let deadline = Instant::now() + timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match self.lines.recv_timeout(left) {
                Ok(line) if pred(&line) => return true,
                Ok(_) => continue,
                Err(_) => return false,
            }
        }
    }

    /// Waits until something in the sandbox is listening on `port`.
    pub fn wait_for_listen(&mut self, port: u16, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        while Instant::now() < deadline {
            if crate::ports::is_listening(port) {
                return true;
            }
            if self.is_running() == Some(false) {
                return false;
            }
            std::thread::sleep(Duration::from_millis(5));
        }
        false
    }

    /// `Some(true)` while running, `Some(false)` once exited.
    pub fn is_running(&mut self) -> Option<bool> {
        self.child.try_wait().ok().map(|s| s.is_none())
    }

    /// Waits for a voluntary exit.
    pub fn wait(mut self, timeout: Duration) -> RunResult {
        let status = self.child.wait_timeout(timeout).ok().flatten();
        let timed_out = status.is_none();
        self.finish(status, timed_out)
    }

    /// Stops the process group and collects what it printed.
    pub fn stop(mut self) -> RunResult {
        let status = self.child.try_wait().ok().flatten();
        self.finish(status, false)
    }

    fn finish(&mut self, status: Option<ExitStatus>, timed_out: bool) -> RunResult {
        kill_group(&self.child);
        let status = match status {
            Some(s) => s,
            None => self.child.wait().unwrap_or_else(|_| ExitStatus::from_raw(libc::SIGKILL)),
        };
        for r in self.readers.drain(..) {
            let _ = r.join();
        }
        let (exit_code, signal, mut verdict) = classify(status, timed_out);
        // A SIGKILL we sent ourselves is not a resource verdict.
        if signal == Some(libc::SIGKILL) && !timed_out {
            verdict = Verdict::Ok;
        }
        RunResult {
            exit_code,
            signal,
            stdout: std::mem::take(&mut *self.stdout.lock().unwrap()),
            stderr: std::mem::take(&mut *self.stderr.lock().unwrap()),
            wall_time: self.started.elapsed(),
            verdict,
        }
    }
}

impl Drop for Background {
    fn drop(&mut self) {
        if let Ok(None) = self.child.try_wait() {
            kill_group(&self.child);
            let _ = self.child.wait();
        }
    }
}

fn kill_group(child: &Child) {
    let pid = child.id() as libc::pid_t;
    // SAFETY: plain syscalls on a process group we created with setsid.
    unsafe {
        libc::kill(-pid, libc::SIGKILL);
        libc::kill(pid, libc::SIGKILL);
    }
}

pub trait IsolationProvider: Send + Sync {
    fn provision(&self) -> Result<Sandbox, RunnerError>;
    fn execute(&self, sandbox: &Sandbox, req: &RunRequest) -> Result<RunResult, RunnerError>;
    fn spawn(&self, sandbox: &Sandbox, req: &RunRequest) -> Result<Background, RunnerError>;
    fn destroy(&self, sandbox: Sandbox);
    /// Whether confinement (filesystem and network) is actually enforced.
    fn enforced(&self) -> bool;
}

/// Runs `f` in a fresh sandbox and always destroys it afterwards.
pub fn with_sandbox<P, T>(provider: &P, f: impl FnOnce(&Sandbox) -> T) -> Result<T, RunnerError>
where
    P: IsolationProvider + ?Sized,
{
    let sandbox = provider.provision()?;
    let out = f(&sandbox);
    provider.destroy(sandbox);
    Ok(out)
}

#[derive(Debug)]
pub struct LocalProvider {
    scratch: Option<PathBuf>,
    confine: bool,
    next_id: AtomicU64,
}

impl Default for LocalProvider {
    fn default() -> Self {
        LocalProvider::new()
    }
}

impl LocalProvider {
    /// Confines processes with Landlock when the kernel supports it.
    pub fn new() -> Self {
        LocalProvider { scratch: None, confine: landlock_available(), next_id: AtomicU64::new(1) }
    }

    /// No filesystem or network confinement; rlimits and sessions only.
    pub fn unconfined() -> Self {
        LocalProvider { scratch: None, confine: false, next_id: AtomicU64::new(1) }
    }

    /// Places sandboxes under `dir` instead of the system temp directory.
    pub fn in_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.scratch = Some(dir.into());
        self
    }

    fn command(&self, sandbox: &Sandbox, req: &RunRequest) -> Result<Command, RunnerError> {
        let program = if req.program.is_absolute() { req.program.clone() } else { sandbox.path().join(&req.program) };
        let mut cmd = Command::new(&program);
        cmd.args(&req.args)
            .current_dir(sandbox.path())
            .env_clear()
            .env("PATH", "/usr/local/bin:/usr/bin:/bin")
            .env("HOME", sandbox.path())
            .env("TMPDIR", sandbox.path())
            .env("LANG", "C.UTF-8");
        for (k, v) in &req.env {
            cmd.env(k, v);
        }

        let ruleset = if self.confine {
            Some(build_ruleset(sandbox.path(), &req.limits.network).map_err(|e| RunnerError::Sandbox(e.to_string()))?)
        } else {
            None
        };
        let ruleset = Mutex::new(ruleset);
        let limits = req.limits.clone();
        let isolate_net = self.confine && limits.network == NetworkPolicy::None;
        // SAFETY: the hook runs between fork and exec; it only issues
        // syscalls (setsid, setrlimit, prctl, landlock) and does not allocate
        // on the success path.
        unsafe {
            cmd.pre_exec(move || {
                if libc::setsid() < 0 {
                    return Err(io::Error::last_os_error());
                }
                set_rlimit(libc::RLIMIT_CPU, limits.cpu_seconds)?;
                set_rlimit(libc::RLIMIT_AS, limits.memory_bytes)?;
                set_rlimit(libc::RLIMIT_CORE, 0)?;
                // Best effort: an empty network namespace also covers UDP and
                // raw sockets, which Landlock does not mediate.
                if isolate_net {
                    let _ = libc::unshare(libc::CLONE_NEWNET);
                }
                if let Some(rs) = ruleset.lock().ok().and_then(|mut g| g.take()) {
                    rs.restrict_self().map_err(|_| io::Error::from(io::ErrorKind::PermissionDenied))?;
                }
                Ok(())
            });
        }
        Ok(cmd)
    }
}

fn set_rlimit(resource: libc::__rlimit_resource_t, value: u64) -> io::Result<()> {
    let lim = libc::rlimit { rlim_cur: value as libc::rlim_t, rlim_max: value as libc::rlim_t };
    // SAFETY: setrlimit with a valid pointer to a stack value.
    if unsafe { libc::setrlimit(resource, &lim) } != 0 {
        return Err(io::Error::last_os_error());
    }
    Ok(())
}

const LANDLOCK_ABI: ABI = ABI::V6;

fn build_ruleset(dir: &Path, network: &NetworkPolicy) -> Result<RulesetCreated, landlock::RulesetError> {
    let ports: &[u16] = match network {
        NetworkPolicy::None => &[],
        NetworkPolicy::Loopback { ports } => ports,
    };
    Ruleset::default()
        .set_compatibility(CompatLevel::BestEffort)
        .handle_access(AccessFs::from_all(LANDLOCK_ABI))?
        .handle_access(AccessNet::from_all(LANDLOCK_ABI))?
        .scope(Scope::from_all(LANDLOCK_ABI))?
        .create()?
        .add_rules(path_beneath_rules(["/"], AccessFs::from_read(LANDLOCK_ABI)))?
        .add_rules(path_beneath_rules([dir], AccessFs::from_all(LANDLOCK_ABI)))?
        .add_rules(path_beneath_rules(["/dev/null", "/dev/zero", "/dev/tty"], AccessFs::from_all(LANDLOCK_ABI)))?
        .add_rules(ports.iter().map(|&p| Ok::<_, landlock::RulesetError>(NetPort::new(p, AccessNet::from_all(LANDLOCK_ABI)))))
}

/// Probes Landlock on a throwaway thread (restrictions are per-thread).
pub fn landlock_available() -> bool {
    static PROBE: OnceLock<bool> = OnceLock::new();
    *PROBE.get_or_init(|| {
        std::thread::spawn(|| {
            let Ok(dir) = tempfile::tempdir() else { return false };
            match build_ruleset(dir.path(), &NetworkPolicy::None).and_then(|r| r.restrict_self()) {
                Ok(status) => status.ruleset == RulesetStatus::FullyEnforced,
                Err(_) => false,
            }
        })
        .join()
        .unwrap_or(false)
    })
}

fn pump(mut from: impl Read + Send + 'static, into: Arc<Mutex<Vec<u8>>>) -> JoinHandle<()> {
    std::thread::spawn(move || {
        let mut buf = [0u8; 8192];
        loop {
            match from.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    let mut out = into.lock().unwrap();
                    let room = OUTPUT_CAP.saturating_sub(out.len());
                    out.extend_from_slice(&buf[..n.min(room)]);
                }
            }
        }
    })
}

impl IsolationProvider for LocalProvider {
    fn provision(&self) -> Result<Sandbox, RunnerError> {
        let builder = {
            let mut b = tempfile::Builder::new();
            b.prefix("bibifi-sandbox-");
            b
        };
        let dir = match &self.scratch {
            Some(root) => builder.tempdir_in(root),
            None => builder.tempdir(),
        }
        .map_err(|e| RunnerError::Sandbox(format!("provision: {e}")))?;
        Ok(Sandbox { id: self.next_id.fetch_add(1, Ordering::Relaxed), dir })
    }

    fn execute(&self, sandbox: &Sandbox, req: &RunRequest) -> Result<RunResult, RunnerError> {
        let mut cmd = self.command(sandbox, req)?;
        cmd.stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped());
        let started = Instant::now();
        let mut child = cmd.spawn().map_err(|e| RunnerError::Spawn { program: req.program.clone(), source: e })?;

        let stdout = Arc::new(Mutex::new(Vec::new()));
        let stderr = Arc::new(Mutex::new(Vec::new()));
        let readers = [
            pump(child.stdout.take().expect("piped"), stdout.clone()),
            pump(child.stderr.take().expect("piped"), stderr.clone()),
        ];
        let mut stdin = child.stdin.take().expect("piped");
        let input = req.stdin.clone();
        let writer = std::thread::spawn(move || {
            let _ = stdin.write_all(&input);
        });

        let status = child.wait_timeout(req.limits.wall).map_err(|e| RunnerError::Sandbox(e.to_string()))?;
        let timed_out = status.is_none();
        kill_group(&child);
        let status = match status {
            Some(s) => s,
            None => child.wait().map_err(|e| RunnerError::Sandbox(e.to_string()))?,
        };
        let wall_time = started.elapsed();
        let _ = writer.join();
        for r in readers {
            let _ = r.join();
        }
        let (exit_code, signal, verdict) = classify(status, timed_out);
        let stdout = std::mem::take(&mut *stdout.lock().unwrap());
        let stderr = std::mem::take(&mut *stderr.lock().unwrap());
        Ok(RunResult { exit_code, signal, stdout, stderr, wall_time, verdict })
    }

    fn spawn(&self, sandbox: &Sandbox, req: &RunRequest) -> Result<Background, RunnerError> {
        let mut cmd = self.command(sandbox, req)?;
        cmd.stdin(Stdio::null()).stdout(Stdio::piped()).stderr(Stdio::piped());
        let mut child = cmd.spawn().map_err(|e| RunnerError::Spawn { program: req.program.clone(), source: e })?;
        let stdout = Arc::new(Mutex::new(Vec::new()));
        let stderr = Arc::new(Mutex::new(Vec::new()));
        let (tx, lines) = mpsc::channel();
        let out = child.stdout.take().expect("piped");
        let captured = stdout.clone();
        let line_reader = std::thread::spawn(move || {
            let mut reader = BufReader::new(out);
            let mut line = Vec::new();
            loop {
                line.clear();
                match reader.read_until(b'\n', &mut line) {
                    Ok(0) | Err(_) => break,
                    Ok(_) => {
                        {
                            let mut all = captured.lock().unwrap();
                            if all.len() < OUTPUT_CAP {
                                all.extend_from_slice(&line);
                            }
                        }
                        let text = String::from_utf8_lossy(&line).trim_end_matches(['\r', '\n']).to_owned();
                        let _ = tx.send(text);
                    }
                }
            }
        });
        let readers = vec![line_reader, pump(child.stderr.take().expect("piped"), stderr.clone())];
        Ok(Background { child, started: Instant::now(), lines, stdout, stderr, readers })
    }

    fn destroy(&self, sandbox: Sandbox) {
        drop(sandbox);
    }

    fn enforced(&self) -> bool {
        self.confine
    }
}
