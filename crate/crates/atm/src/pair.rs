use std::io::Write;
use std::path::Path;
use std::sync::atomic::AtomicBool;
use std::sync::mpsc::{self, Sender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use bibifi_runner::{Background, RunnerError, Session, Verdict};

use crate::cli::{self, EXIT_PROTOCOL};
use crate::wire::Flavor;

pub const BANK_READY: Duration = Duration::from_secs(10);

#[derive(Debug, thiserror::Error)]
pub enum AtmError {
    #[error(transparent)]
    Runner(#[from] RunnerError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bank did not start: {0}")]
    BankStart(String),
    #[error("oracle fault: {0}")]
    OracleFault(String),
}

/// Result of one `atm` invocation.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct AtmRun {
    pub exit_code: Option<i32>,
    pub signal: Option<i32>,
    pub stdout: String,
    pub hung: bool,
}

impl AtmRun {
    /// Hangs, protocol errors and abnormal terminations.
    pub fn faulted(&self) -> bool {
        self.hung || self.signal.is_some() || self.exit_code == Some(EXIT_PROTOCOL)
    }

    pub fn observable(&self) -> (Option<i32>, &str) {
        (self.exit_code, &self.stdout)
    }
}

/// An `atm`/`bank` implementation sharing one working directory.
pub trait AtmPair {
    fn dir(&self) -> &Path;
    fn start_bank(&mut self, port: u16) -> Result<(), AtmError>;
    fn run_atm(&self, args: &[String]) -> Result<AtmRun, AtmError>;
    fn stop_bank(&mut self);
}

struct BankLog {
    text: Arc<Mutex<String>>,
    tx: Sender<()>,
}

impl Write for BankLog {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let mut t = self.text.lock().unwrap();
        t.push_str(&String::from_utf8_lossy(buf));
        if t.lines().any(|l| l == "created") {
            let _ = self.tx.send(());
        }
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

struct RunningBank {
    stop: Arc<AtomicBool>,
    handle: JoinHandle<i32>,
}

/// A pair running in this process, bank on a thread.
pub struct InProcessPair {
    flavor: Flavor,
    dir: tempfile::TempDir,
    atm_timeout: Duration,
    bank: Option<RunningBank>,
    log: Arc<Mutex<String>>,
}

impl InProcessPair {
    pub fn new(flavor: Flavor) -> std::io::Result<Self> {
        Ok(InProcessPair {
            flavor,
            dir: tempfile::tempdir()?,
            atm_timeout: crate::bank::IO_TIMEOUT,
            bank: None,
            log: Arc::default(),
        })
    }

    pub fn with_atm_timeout(mut self, timeout: Duration) -> Self {
        self.atm_timeout = timeout;
        self
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    /// Everything the bank has printed so far.
    pub fn bank_log(&self) -> String {
        self.log.lock().unwrap().clone()
    }
}

impl AtmPair for InProcessPair {
    fn dir(&self) -> &Path {
        self.dir.path()
    }

    fn start_bank(&mut self, port: u16) -> Result<(), AtmError> {
        self.stop_bank();
        let stop = Arc::new(AtomicBool::new(false));
        let (tx, rx) = mpsc::channel();
        let mut log = BankLog { text: self.log.clone(), tx };
        let (flavor, dir, flag) = (self.flavor, self.dir.path().to_path_buf(), stop.clone());
        let args = vec!["-p".to_string(), port.to_string(), "-s".into(), cli::DEFAULT_AUTH.into()];
        let handle = std::thread::spawn(move || cli::bank(&args, &dir, flavor, &flag, &mut log));
        match rx.recv_timeout(BANK_READY) {
            Ok(()) => {
                self.bank = Some(RunningBank { stop, handle });
                Ok(())
            }
            Err(_) => {
                stop.store(true, std::sync::atomic::Ordering::Relaxed);
                let code = handle.join().ok();
                Err(AtmError::BankStart(format!("exit {code:?}")))
            }
        }
    }

    fn run_atm(&self, args: &[String]) -> Result<AtmRun, AtmError> {
        let out = cli::atm(args, self.dir.path(), self.flavor, self.atm_timeout);
        Ok(AtmRun { exit_code: Some(out.code), signal: None, stdout: out.stdout, hung: false })
    }

    fn stop_bank(&mut self) {
        if let Some(b) = self.bank.take() {
            b.stop.store(true, std::sync::atomic::Ordering::Relaxed);
            let _ = b.handle.join();
        }
    }
}

impl Drop for InProcessPair {
    fn drop(&mut self) {
        self.stop_bank();
    }
}

/// A built submission's `atm` and `bank` inside one sandbox.
pub struct SessionPair {
    bank: Option<Background>,
    session: Session,
}

impl SessionPair {
    /// `session` must allow the bank port and every port the atm connects to.
    pub fn new(session: Session) -> Self {
        SessionPair { bank: None, session }
    }

    pub fn session(&self) -> &Session {
        &self.session
    }
}

impl AtmPair for SessionPair {
    fn dir(&self) -> &Path {
        self.session.dir()
    }

    fn start_bank(&mut self, port: u16) -> Result<(), AtmError> {
        self.stop_bank();
        let args = vec!["-p".to_string(), port.to_string(), "-s".into(), cli::DEFAULT_AUTH.into()];
        let mut bg = self.session.spawn("bank", &args)?;
        if !bg.wait_for_line(BANK_READY, |l| l.trim() == "created") {
            let r = bg.stop();
            return Err(AtmError::BankStart(format!("exit {:?}, stderr {}", r.exit_code, String::from_utf8_lossy(&r.stderr))));
        }
        self.bank = Some(bg);
        Ok(())
    }

    fn run_atm(&self, args: &[String]) -> Result<AtmRun, AtmError> {
        let r = self.session.run("atm", args)?;
        Ok(AtmRun {
            exit_code: r.exit_code,
            signal: r.signal,
            stdout: r.stdout_str(),
            hung: r.verdict == Verdict::Timeout,
        })
    }

    fn stop_bank(&mut self) {
        if let Some(bg) = self.bank.take() {
            bg.stop();
        }
    }
}

impl Drop for SessionPair {
    fn drop(&mut self) {
        self.stop_bank();
    }
}
