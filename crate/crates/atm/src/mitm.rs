//! A small MITM toolkit (proxy plus command-server client) and the fixture
//! strategies built from it.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{Shutdown, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::harness::{CommandReply, Mitm, MitmPorts, MitmRunning};
use crate::pair::AtmError;
use crate::wire::split_frames;

/// What the proxy does with each connection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relay {
    Forward,
    /// Accepts the atm but never talks to the bank.
    Hold,
    /// Flips one bit of the bank's reply stream at this offset.
    CorruptReply(usize),
}

/// Bytes seen on one proxied connection.
#[derive(Clone, Debug, Default)]
pub struct Capture {
    pub from_atm: Vec<u8>,
    pub from_bank: Vec<u8>,
}

pub struct Proxy {
    stop: Arc<AtomicBool>,
    captures: Arc<Mutex<Vec<Arc<Mutex<Capture>>>>>,
    handle: Option<JoinHandle<()>>,
}

fn pump(mut from: TcpStream, mut to: TcpStream, sink: Arc<Mutex<Capture>>, atm_side: bool, corrupt: Option<usize>) {
    let mut buf = [0u8; 8192];
    let mut seen = 0usize;
    loop {
        let n = match from.read(&mut buf) {
            Ok(0) | Err(_) => break,
            Ok(n) => n,
        };
        let chunk = &mut buf[..n];
        {
            let mut c = sink.lock().unwrap();
            if atm_side { &mut c.from_atm } else { &mut c.from_bank }.extend_from_slice(chunk);
        }
        if let Some(at) = corrupt.filter(|at| (seen..seen + n).contains(at)) {
            chunk[at - seen] ^= 0x01;
        }
        seen += n;
        if to.write_all(chunk).is_err() {
            break;
        }
    }
    let _ = to.shutdown(Shutdown::Write);
}

impl Proxy {
    pub fn start(listen: u16, bank: u16, relay: Relay) -> std::io::Result<Proxy> {
        let listener = TcpListener::bind(("127.0.0.1", listen))?;
        listener.set_nonblocking(true)?;
        let stop = Arc::new(AtomicBool::new(false));
        let captures: Arc<Mutex<Vec<Arc<Mutex<Capture>>>>> = Arc::default();
        let (flag, caps) = (stop.clone(), captures.clone());
        let handle = std::thread::spawn(move || {
            let mut held = Vec::new();
            while !flag.load(Ordering::Relaxed) {
                let Ok((atm, _)) = listener.accept() else {
                    std::thread::sleep(Duration::from_millis(2));
                    continue;
                };
                let _ = atm.set_nonblocking(false);
                let _ = atm.set_nodelay(true);
                let cap = Arc::new(Mutex::new(Capture::default()));
                caps.lock().unwrap().push(cap.clone());
                if relay == Relay::Hold {
                    held.push(atm);
                    continue;
                }
                let Ok(bank) = TcpStream::connect(("127.0.0.1", bank)) else { continue };
                let _ = bank.set_nodelay(true);
                let corrupt = match relay {
                    Relay::CorruptReply(at) => Some(at),
                    _ => None,
                };
                let (a2, b2) = (atm.try_clone().expect("clone socket"), bank.try_clone().expect("clone socket"));
                let c2 = cap.clone();
                std::thread::spawn(move || pump(atm, bank, cap, true, None));
                std::thread::spawn(move || pump(b2, a2, c2, false, corrupt));
            }
        });
        Ok(Proxy { stop, captures, handle: Some(handle) })
    }

    pub fn captures(&self) -> Vec<Capture> {
        self.captures.lock().unwrap().iter().map(|c| c.lock().unwrap().clone()).collect()
    }
}

impl Drop for Proxy {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

/// Client side of the command-server protocol.
pub struct CommandClient {
    stream: TcpStream,
    reader: BufReader<TcpStream>,
}

impl CommandClient {
    pub fn connect(port: u16) -> std::io::Result<Self> {
        let stream = TcpStream::connect(("127.0.0.1", port))?;
        stream.set_read_timeout(Some(Duration::from_secs(60)))?;
        stream.set_nodelay(true)?;
        Ok(CommandClient { reader: BufReader::new(stream.try_clone()?), stream })
    }

    pub fn request(&mut self, req: &Value) -> std::io::Result<Value> {
        let mut line = req.to_string();
        line.push('\n');
        self.stream.write_all(line.as_bytes())?;
        let mut reply = String::new();
        self.reader.read_line(&mut reply)?;
        serde_json::from_str(&reply).map_err(std::io::Error::other)
    }

    pub fn command(&mut self, argv: &[&str]) -> std::io::Result<CommandReply> {
        let v = self.request(&json!({ "command": argv }))?;
        serde_json::from_value(v).map_err(std::io::Error::other)
    }

    pub fn getcard(&mut self, account: &str) -> std::io::Result<Option<String>> {
        Ok(self.request(&json!({ "getcard": account }))?.get("card").and_then(Value::as_str).map(String::from))
    }

    pub fn guess(&mut self, secret: &str, value: &str) -> std::io::Result<Value> {
        self.request(&json!({ "guess": { secret: value } }))
    }

    pub fn done(&mut self) -> std::io::Result<Value> {
        self.request(&json!({ "done": true }))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// Forwards everything while running a seeded random script.
    PassThrough(u64),
    /// Re-sends a captured deposit on a fresh connection.
    Replay,
    /// Reads plaintext requests for the secrets, plus seeded filler commands.
    Sniffer(u64),
    /// Swallows the atm's first connection.
    Drop,
    /// Flips a bit in the bank's first reply.
    Corrupt,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::PassThrough(_) => "pass-through",
            Strategy::Replay => "replay",
            Strategy::Sniffer(_) => "sniffer",
            Strategy::Drop => "drop",
            Strategy::Corrupt => "corrupt",
        }
    }

    /// Parses `name` or `name:seed`.
    pub fn parse(s: &str) -> Option<Strategy> {
        let (name, seed) = match s.split_once(':') {
            Some((n, seed)) => (n, seed.parse().ok()?),
            None => (s, 0),
        };
        Some(match name {
            "pass-through" => Strategy::PassThrough(seed),
            "replay" => Strategy::Replay,
            "sniffer" => Strategy::Sniffer(seed),
            "drop" => Strategy::Drop,
            "corrupt" => Strategy::Corrupt,
            _ => return None,
        })
    }

    fn relay(&self) -> Relay {
        match self {
            Strategy::Drop => Relay::Hold,
            Strategy::Corrupt => Relay::CorruptReply(40),
            _ => Relay::Forward,
        }
    }
}

fn random_script(rng: &mut ChaCha8Rng, client: &mut CommandClient) -> std::io::Result<()> {
    let names = ["acct0", "acct1", "acct2"];
    for _ in 0..rng.random_range(1..=8) {
        let name = names[rng.random_range(0..names.len())];
        let amount = format!("{}.{:02}", rng.random_range(0..500), rng.random_range(0..100));
        match rng.random_range(0..6) {
            0 | 1 => client.command(&["-a", name, "-n", &amount])?,
            2 => client.command(&["-a", name, "-d", &amount])?,
            3 => client.command(&["-a", name, "-w", &amount])?,
            4 => client.command(&["-a", name, "-g"])?,
            _ => {
                client.getcard(name)?;
                continue;
            }
        };
    }
    Ok(())
}

/// Looks for a field in any plaintext JSON request the atm sent.
fn sniff(proxy: &Proxy, field: &str) -> Option<String> {
    proxy.captures().iter().find_map(|c| {
        split_frames(&c.from_atm).into_iter().find_map(|f| {
            let v: Value = serde_json::from_slice(f).ok()?;
            match v.get(field)? {
                Value::String(s) => Some(s.clone()),
                Value::Number(n) => n.as_u64().map(|cents| crate::Amount(cents).to_arg()),
                _ => None,
            }
        })
    })
}

fn replay_to_bank(bank: u16, bytes: &[u8]) -> std::io::Result<()> {
    let mut s = TcpStream::connect(("127.0.0.1", bank))?;
    s.set_read_timeout(Some(Duration::from_secs(5)))?;
    s.write_all(bytes)?;
    let _ = s.shutdown(Shutdown::Write);
    let mut sink = Vec::new();
    let _ = s.read_to_end(&mut sink);
    Ok(())
}

/// Runs a strategy to completion: the proxy plus its command-server script.
pub fn run(strategy: Strategy, ports: &MitmPorts) -> std::io::Result<()> {
    let proxy = Proxy::start(ports.listen, ports.bank, strategy.relay())?;
    let mut client = CommandClient::connect(ports.command)?;
    match strategy {
        Strategy::PassThrough(seed) => random_script(&mut ChaCha8Rng::seed_from_u64(seed), &mut client)?,
        Strategy::Replay => {
            client.command(&["-a", "alice", "-n", "100.00"])?;
            client.command(&["-a", "alice", "-d", "50.00"])?;
            let deposit = proxy.captures().get(1).map(|c| c.from_atm.clone()).unwrap_or_default();
            replay_to_bank(ports.bank, &deposit)?;
        }
        Strategy::Sniffer(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            client.command(&["-a", "alice", "-n", "%AMOUNT%"])?;
            client.command(&["-a", "%ACCOUNT%", "-n", "1.00"])?;
            random_script(&mut rng, &mut client)?;
            let amount = sniff(&proxy, "amount").unwrap_or_else(|| format!("{}.{:02}", rng.random_range(0..1000), rng.random_range(0..100)));
            client.guess("amount", &amount)?;
            if let Some(account) = proxy.captures().iter().find_map(|c| {
                split_frames(&c.from_atm).into_iter().find_map(|f| {
                    let v: Value = serde_json::from_slice(f).ok()?;
                    let a = v.get("account")?.as_str()?;
                    (a != "alice" && !a.starts_with("acct")).then(|| a.to_string())
                })
            }) {
                client.guess("account", &account)?;
            }
        }
        Strategy::Drop | Strategy::Corrupt => {
            client.command(&["-a", "bob", "-n", "10.00"])?;
        }
    }
    client.done()?;
    Ok(())
}

/// A strategy run on a thread of this process.
pub struct ThreadMitm(pub Strategy);

struct RunningThread(Option<JoinHandle<std::io::Result<()>>>);

impl MitmRunning for RunningThread {}

impl Drop for RunningThread {
    fn drop(&mut self) {
        if let Some(h) = self.0.take() {
            let _ = h.join();
        }
    }
}

impl Mitm for ThreadMitm {
    fn start(&self, ports: &MitmPorts) -> Result<Box<dyn MitmRunning>, AtmError> {
        let (strategy, ports) = (self.0, *ports);
        Ok(Box::new(RunningThread(Some(std::thread::spawn(move || run(strategy, &ports))))))
    }
}
