//! The command server a MITM drives, and the two-phase MITM judges.
//!
//! Requests are newline-delimited JSON objects on one TCP connection:
//!
//! ```text
//! {"command": ["-a", "%ACCOUNT%", "-n", "%AMOUNT%"]}  -> {"exit": 0, "output": "..."}
//! {"getcard": "alice"}                                -> {"card": "<hex>"} | {"error": "..."}
//! {"guess": {"amount": "12.34"}}                      -> {"ok": true}
//! {"done": true}                                      -> {"ok": true}
//! ```
//!
//! The server adds `-p <proxy port> -s bank.auth` to every command. Output
//! of commands that involve a secret, directly or through an account that
//! did, is withheld (`null`).

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use bibifi_runner::{Artifacts, Background, IsolationProvider, Judgement, Limits, Session};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cli::{self, Mode};
use crate::currency::Amount;
use crate::pair::{AtmError, AtmPair, AtmRun, InProcessPair};
use crate::wire::Flavor;

pub const AMOUNT_PLACEHOLDER: &str = "%AMOUNT%";
pub const ACCOUNT_PLACEHOLDER: &str = "%ACCOUNT%";
/// How long the MITM has to connect to the command server.
pub const CONNECT_WAIT: Duration = Duration::from_secs(10);
/// Longest silence tolerated between MITM requests.
pub const COMMAND_IDLE: Duration = Duration::from_secs(30);
/// Wall limit for one target `atm` run; beyond it the run counts as a hang.
pub const ATM_WALL: Duration = Duration::from_secs(15);
const RESERVED_FLAGS: [&str; 3] = ["-s", "-p", "-i"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Secrets {
    pub amount: Amount,
    pub account: String,
}

impl Secrets {
    pub fn generate(rng: &mut impl Rng) -> Self {
        let account = (0..12).map(|_| rng.random_range(b'a'..=b'z') as char).collect();
        Secrets { amount: Amount(rng.random_range(1..=10_000_000)), account }
    }

    fn substitute(&self, arg: &str) -> String {
        arg.replace(AMOUNT_PLACEHOLDER, &self.amount.to_arg()).replace(ACCOUNT_PLACEHOLDER, &self.account)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MitmPorts {
    /// Where the MITM listens for the atm.
    pub listen: u16,
    pub bank: u16,
    pub command: u16,
    pub oracle_bank: u16,
}

impl MitmPorts {
    pub fn allocate() -> std::io::Result<Self> {
        let p = bibifi_runner::allocate_ports(4)?;
        Ok(MitmPorts { listen: p[0], bank: p[1], command: p[2], oracle_bank: p[3] })
    }

    /// Ports the target's own processes need.
    pub fn target_ports(&self) -> Vec<u16> {
        vec![self.bank, self.listen]
    }

    /// Ports the MITM needs.
    pub fn mitm_ports(&self) -> Vec<u16> {
        vec![self.listen, self.bank, self.command]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GuessRequest {
    Amount(serde_json::Value),
    Account(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MitmRequest {
    Command(Vec<String>),
    Getcard(String),
    Guess(GuessRequest),
    Done(bool),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandReply {
    pub exit: Option<i32>,
    pub output: Option<String>,
}

/// One `atm` command as the MITM asked for it and as it ran.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutedCommand {
    pub requested: Vec<String>,
    /// Placeholders substituted, harness flags not included.
    pub argv: Vec<String>,
    pub run: AtmRun,
    pub withheld: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Interaction {
    RunAtm { index: usize },
    GetCard { account: String, granted: bool },
    Guess { secret: String, value: String, accepted: bool },
    Done,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "end", content = "detail", rename_all = "kebab-case")]
pub enum SessionEnd {
    Done,
    Malformed(String),
    Abandoned(String),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Guesses {
    pub amount: Option<String>,
    pub account: Option<String>,
}

/// Everything recorded while the MITM ran against the target.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MitmTranscript {
    pub secrets: Secrets,
    pub commands: Vec<ExecutedCommand>,
    pub interactions: Vec<Interaction>,
    pub revealed: BTreeSet<String>,
    pub guesses: Guesses,
    /// Direct `-g` queries for created accounts whose cards stayed hidden.
    pub balances: BTreeMap<String, AtmRun>,
    pub end: SessionEnd,
}

impl MitmTranscript {
    pub fn completed(&self) -> bool {
        self.end == SessionEnd::Done
    }

    pub fn first_fault(&self) -> Option<String> {
        self.commands
            .iter()
            .find(|c| c.run.faulted())
            .map(|c| format!("atm {:?} faulted: {:?}", c.argv, c.run))
            .or_else(|| self.balances.iter().find(|(_, r)| r.faulted()).map(|(a, r)| format!("balance query for {a} faulted: {r:?}")))
    }
}

pub trait MitmRunning: Send {}

/// A man-in-the-middle program, started with its listen, bank and
/// command-server ports.
pub trait Mitm {
    fn start(&self, ports: &MitmPorts) -> Result<Box<dyn MitmRunning>, AtmError>;
}

/// A contestant-supplied MITM executable run in its own sandbox as
/// `program [prefix...] <listen> <bank> <command>`.
pub struct ProcessMitm {
    pub provider: Arc<dyn IsolationProvider>,
    pub program: PathBuf,
    pub prefix: Vec<String>,
}

struct RunningProcess {
    _bg: Background,
    _session: Session,
}

impl MitmRunning for RunningProcess {}

impl Mitm for ProcessMitm {
    fn start(&self, ports: &MitmPorts) -> Result<Box<dyn MitmRunning>, AtmError> {
        let dir = self.program.parent().unwrap_or(std::path::Path::new("."));
        let name = self.program.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let artifacts = Artifacts::from_dir(dir, std::slice::from_ref(&name))?;
        let session = Session::open(self.provider.clone(), artifacts)?.with_limits(Limits::test().with_ports(&ports.mitm_ports()));
        let mut args = self.prefix.clone();
        args.extend([ports.listen, ports.bank, ports.command].map(|p| p.to_string()));
        let bg = session.spawn(&name, &args)?;
        Ok(Box::new(RunningProcess { _bg: bg, _session: session }))
    }
}

fn reply(stream: &mut TcpStream, value: &serde_json::Value) -> bool {
    let mut line = value.to_string();
    line.push('\n');
    stream.write_all(line.as_bytes()).is_ok()
}

struct Server<'a> {
    target: &'a dyn AtmPair,
    ports: MitmPorts,
    t: MitmTranscript,
    tainted: BTreeSet<String>,
    /// Accounts the MITM created under a literal name, with their card file.
    own_cards: BTreeMap<String, String>,
}

impl Server<'_> {
    fn command(&mut self, requested: Vec<String>) -> Result<Result<CommandReply, String>, AtmError> {
        if let Some(f) = requested.iter().find(|a| RESERVED_FLAGS.contains(&a.as_str())) {
            return Ok(Err(format!("{f} is set by the command server")));
        }
        let secret = requested.iter().any(|a| a.contains(AMOUNT_PLACEHOLDER) || a.contains(ACCOUNT_PLACEHOLDER));
        let argv: Vec<String> = requested.iter().map(|a| self.t.secrets.substitute(a)).collect();
        let parsed = cli::parse_atm(&argv).ok();
        if let (true, Some(p)) = (secret, &parsed) {
            self.tainted.insert(p.account.clone());
        }
        let withheld = secret || parsed.as_ref().is_some_and(|p| self.tainted.contains(&p.account));
        let mut full = vec!["-p".to_string(), self.ports.listen.to_string(), "-s".into(), cli::DEFAULT_AUTH.into()];
        full.extend(argv.iter().cloned());
        let run = self.target.run_atm(&full)?;
        if let Some(p) = parsed.filter(|p| !withheld && matches!(p.mode, Mode::Create(_)) && run.exit_code == Some(0)) {
            self.own_cards.insert(p.account, p.card);
        }
        let reply = if withheld {
            CommandReply { exit: None, output: None }
        } else {
            CommandReply { exit: run.exit_code, output: Some(run.stdout.clone()) }
        };
        self.t.interactions.push(Interaction::RunAtm { index: self.t.commands.len() });
        self.t.commands.push(ExecutedCommand { requested, argv, run, withheld });
        Ok(Ok(reply))
    }

    fn getcard(&mut self, account: String) -> Option<String> {
        let card = self.own_cards.get(&account).filter(|_| !self.tainted.contains(&account))?;
        let bytes = std::fs::read(self.target.dir().join(card)).ok()?;
        self.t.revealed.insert(account);
        Some(hex::encode(bytes))
    }

    fn guess(&mut self, g: GuessRequest) -> bool {
        let (secret, value) = match g {
            GuessRequest::Amount(serde_json::Value::String(s)) => ("amount", s),
            GuessRequest::Amount(v) => ("amount", v.to_string()),
            GuessRequest::Account(s) => ("account", s),
        };
        let slot = if secret == "amount" { &mut self.t.guesses.amount } else { &mut self.t.guesses.account };
        let accepted = slot.is_none();
        if accepted {
            *slot = Some(value.clone());
        }
        self.t.interactions.push(Interaction::Guess { secret: secret.into(), value, accepted });
        accepted
    }

    fn serve(&mut self, listener: &TcpListener) -> Result<SessionEnd, AtmError> {
        listener.set_nonblocking(true)?;
        let deadline = Instant::now() + CONNECT_WAIT;
        let mut stream = loop {
            match listener.accept() {
                Ok((s, _)) => break s,
                Err(_) if Instant::now() < deadline => std::thread::sleep(Duration::from_millis(5)),
                Err(_) => return Ok(SessionEnd::Abandoned("MITM never connected".into())),
            }
        };
        stream.set_nonblocking(false)?;
        stream.set_nodelay(true)?;
        stream.set_read_timeout(Some(COMMAND_IDLE))?;
        let mut lines = BufReader::new(stream.try_clone()?).lines();
        loop {
            let line = match lines.next() {
                Some(Ok(l)) => l,
                Some(Err(e)) => return Ok(SessionEnd::Abandoned(e.to_string())),
                None => return Ok(SessionEnd::Abandoned("connection closed before done".into())),
            };
            if line.trim().is_empty() {
                continue;
            }
            let req = match serde_json::from_str::<MitmRequest>(&line) {
                Ok(r) => r,
                Err(e) => {
                    reply(&mut stream, &serde_json::json!({"error": "malformed request"}));
                    return Ok(SessionEnd::Malformed(format!("{line:?}: {e}")));
                }
            };
            match req {
                MitmRequest::Command(argv) => match self.command(argv)? {
                    Ok(r) => {
                        reply(&mut stream, &serde_json::to_value(r).expect("reply serializes"));
                    }
                    Err(why) => {
                        reply(&mut stream, &serde_json::json!({"error": why}));
                        return Ok(SessionEnd::Malformed(why));
                    }
                },
                MitmRequest::Getcard(account) => {
                    let card = self.getcard(account.clone());
                    self.t.interactions.push(Interaction::GetCard { account, granted: card.is_some() });
                    let v = match card {
                        Some(hex) => serde_json::json!({"card": hex}),
                        None => serde_json::json!({"error": "card not available"}),
                    };
                    reply(&mut stream, &v);
                }
                MitmRequest::Guess(g) => {
                    let v = if self.guess(g) {
                        serde_json::json!({"ok": true})
                    } else {
                        serde_json::json!({"error": "already guessed"})
                    };
                    reply(&mut stream, &v);
                }
                MitmRequest::Done(_) => {
                    self.t.interactions.push(Interaction::Done);
                    reply(&mut stream, &serde_json::json!({"ok": true}));
                    return Ok(SessionEnd::Done);
                }
            }
        }
    }
}

fn balance_args(port: u16, account: &str, card: &str) -> Vec<String> {
    ["-p", &port.to_string(), "-s", cli::DEFAULT_AUTH, "-c", card, "-a", account, "-g"].map(String::from).to_vec()
}

/// Accounts created in the run whose cards the MITM never obtained, with their card files.
fn hidden_accounts(t: &MitmTranscript) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for c in t.commands.iter().filter(|c| c.run.exit_code == Some(0)) {
        if let Ok(p) = cli::parse_atm(&c.argv) {
            if matches!(p.mode, Mode::Create(_)) && !t.revealed.contains(&p.account) {
                out.entry(p.account).or_insert(p.card);
            }
        }
    }
    out
}

/// Phase one: the MITM sits between the target's atm and bank.
pub fn run_mitm_session(
    target: &mut dyn AtmPair,
    mitm: &dyn Mitm,
    ports: &MitmPorts,
    secrets: &Secrets,
) -> Result<MitmTranscript, AtmError> {
    target.start_bank(ports.bank)?;
    let listener = TcpListener::bind(("127.0.0.1", ports.command))?;
    let running = mitm.start(ports)?;
    let mut server = Server {
        target: &*target,
        ports: *ports,
        t: MitmTranscript {
            secrets: secrets.clone(),
            commands: Vec::new(),
            interactions: Vec::new(),
            revealed: BTreeSet::new(),
            guesses: Guesses::default(),
            balances: BTreeMap::new(),
            end: SessionEnd::Abandoned("not started".into()),
        },
        tainted: BTreeSet::new(),
        own_cards: BTreeMap::new(),
    };
    let end = server.serve(&listener);
    drop(running);
    let mut t = server.t;
    t.end = end?;
    if t.completed() {
        for (account, card) in hidden_accounts(&t) {
            let r = target.run_atm(&balance_args(ports.bank, &account, &card))?;
            t.balances.insert(account, r);
        }
    }
    target.stop_bank();
    Ok(t)
}

/// The oracle's outputs for the same commands, run without the MITM.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleReplay {
    pub runs: Vec<AtmRun>,
    pub balances: BTreeMap<String, AtmRun>,
}

/// Phase two. A fault here is an oracle bug, reported as an error.
pub fn replay_on_oracle(t: &MitmTranscript, port: u16) -> Result<OracleReplay, AtmError> {
    let mut oracle = InProcessPair::new(Flavor::Oracle)?;
    oracle.start_bank(port)?;
    let mut runs = Vec::new();
    for c in &t.commands {
        let mut full = vec!["-p".to_string(), port.to_string(), "-s".into(), cli::DEFAULT_AUTH.into()];
        full.extend(c.argv.iter().cloned());
        let r = oracle.run_atm(&full)?;
        if r.faulted() {
            return Err(AtmError::OracleFault(format!("oracle atm {:?}: {r:?}", c.argv)));
        }
        runs.push(r);
    }
    let mut balances = BTreeMap::new();
    for account in t.balances.keys() {
        let card = hidden_accounts(t).remove(account).expect("balances only for hidden accounts");
        let r = oracle.run_atm(&balance_args(port, account, &card))?;
        if r.faulted() {
            return Err(AtmError::OracleFault(format!("oracle balance query for {account}: {r:?}")));
        }
        balances.insert(account.clone(), r);
    }
    oracle.stop_bank();
    Ok(OracleReplay { runs, balances })
}

fn preconditions(t: &MitmTranscript) -> Option<Judgement> {
    if !t.completed() {
        return Some(Judgement::rejected(format!("test did not complete: {:?}", t.end)));
    }
    t.first_fault().map(Judgement::disallowed)
}

pub fn integrity_verdict(t: &MitmTranscript, oracle: &OracleReplay) -> Judgement {
    if let Some(j) = preconditions(t) {
        return j;
    }
    for (c, o) in t.commands.iter().zip(&oracle.runs) {
        if c.run.observable() != o.observable() {
            return Judgement::confirmed(format!(
                "atm {:?}: target exit {:?} output {:?}, oracle exit {:?} output {:?}",
                c.argv, c.run.exit_code, c.run.stdout, o.exit_code, o.stdout
            ));
        }
    }
    for (account, r) in &t.balances {
        match oracle.balances.get(account) {
            Some(o) if o.observable() == r.observable() => {}
            o => {
                return Judgement::confirmed(format!(
                    "balance of {account}: target {:?}, oracle {:?}",
                    r.stdout,
                    o.map(|o| o.stdout.as_str())
                ))
            }
        }
    }
    Judgement::rejected("outputs and hidden balances match the oracle")
}

pub fn privacy_verdict(t: &MitmTranscript) -> Judgement {
    if let Some(j) = preconditions(t) {
        return j;
    }
    let amount_hit = t.guesses.amount.as_deref().and_then(|g| g.parse::<Amount>().ok()) == Some(t.secrets.amount);
    let account_hit = t.guesses.account.as_deref() == Some(t.secrets.account.as_str());
    match (amount_hit, account_hit) {
        (true, _) => Judgement::confirmed(format!("guessed the secret amount {}", t.secrets.amount.to_arg())),
        (_, true) => Judgement::confirmed(format!("guessed the secret account {}", t.secrets.account)),
        _ => Judgement::rejected("no guess matched a secret"),
    }
}

/// Two-phase integrity judgement.
pub fn judge_integrity_mitm(
    target: &mut dyn AtmPair,
    mitm: &dyn Mitm,
    ports: &MitmPorts,
    rng: &mut impl Rng,
) -> Result<Judgement, AtmError> {
    let t = run_mitm_session(target, mitm, ports, &Secrets::generate(rng))?;
    if preconditions(&t).is_some() {
        return Ok(integrity_verdict(&t, &OracleReplay { runs: vec![], balances: BTreeMap::new() }));
    }
    let oracle = replay_on_oracle(&t, ports.oracle_bank)?;
    Ok(integrity_verdict(&t, &oracle))
}

pub fn judge_privacy_mitm(
    target: &mut dyn AtmPair,
    mitm: &dyn Mitm,
    ports: &MitmPorts,
    rng: &mut impl Rng,
) -> Result<Judgement, AtmError> {
    let t = run_mitm_session(target, mitm, ports, &Secrets::generate(rng))?;
    Ok(privacy_verdict(&t))
}

/// Session limits a target pair needs for one MITM test.
pub fn target_limits(ports: &MitmPorts) -> Limits {
    Limits::test().with_wall(ATM_WALL).with_ports(&ports.target_ports())
}
