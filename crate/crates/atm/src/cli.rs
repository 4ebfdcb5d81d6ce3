use std::fs::OpenOptions;
use std::io::Write;
use std::net::{Ipv4Addr, SocketAddr, TcpListener, TcpStream};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Duration;

use rand::RngCore;

use crate::bank::{self, Op, Request, Response, AUTH_LEN, CARD_LEN};
use crate::currency::Amount;
use crate::wire::{Channel, Flavor};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 255;
pub const EXIT_PROTOCOL: i32 = 63;
pub const DEFAULT_PORT: u16 = 3000;
pub const DEFAULT_AUTH: &str = "bank.auth";
pub const MAX_ACCOUNT_LEN: usize = 122;
pub const MAX_FILE_LEN: usize = 127;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Create(Amount),
    Deposit(Amount),
    Withdraw(Amount),
    Balance,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AtmArgs {
    pub auth: String,
    pub ip: Ipv4Addr,
    pub port: u16,
    pub card: String,
    pub account: String,
    pub mode: Mode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Invalid;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Output {
    pub code: i32,
    pub stdout: String,
}

impl Output {
    fn fail(code: i32) -> Output {
        Output { code, stdout: String::new() }
    }
}

fn charset_ok(s: &str) -> bool {
    s.bytes().all(|b| matches!(b, b'_' | b'-' | b'.' | b'0'..=b'9' | b'a'..=b'z'))
}

pub fn valid_account(s: &str) -> bool {
    (1..=MAX_ACCOUNT_LEN).contains(&s.len()) && charset_ok(s)
}

pub fn valid_file_name(s: &str) -> bool {
    (1..=MAX_FILE_LEN).contains(&s.len()) && charset_ok(s) && s != "." && s != ".."
}

pub fn parse_port(s: &str) -> Result<u16, Invalid> {
    if s.is_empty() || s.starts_with('0') || !s.bytes().all(|b| b.is_ascii_digit()) || s.len() > 5 {
        return Err(Invalid);
    }
    match s.parse::<u32>() {
        Ok(p) if (1024..=65535).contains(&p) => Ok(p as u16),
        _ => Err(Invalid),
    }
}

fn parse_ip(s: &str) -> Result<Ipv4Addr, Invalid> {
    let parts: Vec<&str> = s.split('.').collect();
    let canonical = parts.len() == 4
        && parts.iter().all(|p| !p.is_empty() && p.len() <= 3 && p.bytes().all(|b| b.is_ascii_digit()) && (p.len() == 1 || !p.starts_with('0')));
    if !canonical {
        return Err(Invalid);
    }
    s.parse().map_err(|_| Invalid)
}

/// Each option at most once; exactly one of `-n -d -w -g`.
pub fn parse_atm(args: &[String]) -> Result<AtmArgs, Invalid> {
    let (mut auth, mut ip, mut port, mut card, mut account, mut mode) = (None, None, None, None, None, None);
    let mut it = args.iter();
    while let Some(flag) = it.next() {
        let mut value = || it.next().ok_or(Invalid);
        fn once<T>(slot: &mut Option<T>, v: T) -> Result<(), Invalid> {
            if slot.replace(v).is_some() {
                return Err(Invalid);
            }
            Ok(())
        }
        match flag.as_str() {
            "-s" => {
                let v = value()?;
                if !valid_file_name(v) {
                    return Err(Invalid);
                }
                once(&mut auth, v.clone())?
            }
            "-i" => once(&mut ip, parse_ip(value()?)?)?,
            "-p" => once(&mut port, parse_port(value()?)?)?,
            "-c" => {
                let v = value()?;
                if !valid_file_name(v) {
                    return Err(Invalid);
                }
                once(&mut card, v.clone())?
            }
            "-a" => {
                let v = value()?;
                if !valid_account(v) {
                    return Err(Invalid);
                }
                once(&mut account, v.clone())?
            }
            "-n" => once(&mut mode, Mode::Create(value()?.parse().map_err(|_| Invalid)?))?,
            "-d" => once(&mut mode, Mode::Deposit(value()?.parse().map_err(|_| Invalid)?))?,
            "-w" => once(&mut mode, Mode::Withdraw(value()?.parse().map_err(|_| Invalid)?))?,
            "-g" => once(&mut mode, Mode::Balance)?,
            _ => return Err(Invalid),
        }
    }
    let account = account.ok_or(Invalid)?;
    let mode = mode.ok_or(Invalid)?;
    if matches!(mode, Mode::Deposit(a) | Mode::Withdraw(a) if a == Amount::ZERO) {
        return Err(Invalid);
    }
    Ok(AtmArgs {
        auth: auth.unwrap_or_else(|| DEFAULT_AUTH.into()),
        ip: ip.unwrap_or(Ipv4Addr::LOCALHOST),
        port: port.unwrap_or(DEFAULT_PORT),
        card: card.unwrap_or_else(|| format!("{account}.card")),
        account,
        mode,
    })
}

impl AtmArgs {
    pub fn to_args(&self) -> Vec<String> {
        let mut v = vec!["-s".into(), self.auth.clone(), "-i".into(), self.ip.to_string(), "-p".into(), self.port.to_string()];
        v.extend(["-c".into(), self.card.clone(), "-a".into(), self.account.clone()]);
        match self.mode {
            Mode::Create(a) => v.extend(["-n".into(), a.to_arg()]),
            Mode::Deposit(a) => v.extend(["-d".into(), a.to_arg()]),
            Mode::Withdraw(a) => v.extend(["-w".into(), a.to_arg()]),
            Mode::Balance => v.push("-g".into()),
        }
        v
    }
}

fn exchange(addr: SocketAddr, flavor: Flavor, auth: &[u8], req: &Request, timeout: Duration) -> Option<Response> {
    let stream = TcpStream::connect_timeout(&addr, timeout).ok()?;
    stream.set_read_timeout(Some(timeout)).ok()?;
    stream.set_write_timeout(Some(timeout)).ok()?;
    let mut ch = Channel::client(flavor, stream, auth).ok()?;
    ch.send(&serde_json::to_vec(req).expect("request serializes")).ok()?;
    let resp: Response = serde_json::from_slice(&ch.recv().ok()?).ok()?;
    if resp.ok && resp.receipt.is_none() {
        return None;
    }
    Some(resp)
}

/// The `atm` client, run with `cwd` as its working directory.
pub fn atm(args: &[String], cwd: &Path, flavor: Flavor, timeout: Duration) -> Output {
    let Ok(a) = parse_atm(args) else { return Output::fail(EXIT_FAILURE) };
    let Ok(auth) = std::fs::read(cwd.join(&a.auth)) else { return Output::fail(EXIT_FAILURE) };
    let card_path = cwd.join(&a.card);
    let (op, amount, card) = match a.mode {
        Mode::Create(amount) => {
            if card_path.exists() {
                return Output::fail(EXIT_FAILURE);
            }
            let mut card = [0u8; CARD_LEN];
            rand::rng().fill_bytes(&mut card);
            (Op::Create, Some(amount), card.to_vec())
        }
        other => {
            let Ok(card) = std::fs::read(&card_path) else { return Output::fail(EXIT_FAILURE) };
            match other {
                Mode::Deposit(x) => (Op::Deposit, Some(x), card),
                Mode::Withdraw(x) => (Op::Withdraw, Some(x), card),
                _ => (Op::Balance, None, card),
            }
        }
    };
    let req = Request { op, account: a.account.clone(), card: hex::encode(&card), amount };
    let Some(resp) = exchange(SocketAddr::from((a.ip, a.port)), flavor, &auth, &req, timeout) else {
        return Output::fail(EXIT_PROTOCOL);
    };
    let Some(receipt) = resp.receipt.filter(|_| resp.ok) else { return Output::fail(EXIT_FAILURE) };
    if op == Op::Create {
        let written = OpenOptions::new().write(true).create_new(true).open(&card_path).and_then(|mut f| f.write_all(&card));
        if written.is_err() {
            return Output::fail(EXIT_FAILURE);
        }
    }
    Output { code: EXIT_OK, stdout: format!("{receipt}\n") }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BankArgs {
    pub port: u16,
    pub auth: String,
}

pub fn parse_bank(args: &[String]) -> Result<BankArgs, Invalid> {
    let (mut port, mut auth) = (None, None);
    let mut it = args.iter();
    while let Some(flag) = it.next() {
        let v = it.next().ok_or(Invalid)?;
        match flag.as_str() {
            "-p" if port.is_none() => port = Some(parse_port(v)?),
            "-s" if auth.is_none() && valid_file_name(v) => auth = Some(v.clone()),
            _ => return Err(Invalid),
        }
    }
    Ok(BankArgs { port: port.unwrap_or(DEFAULT_PORT), auth: auth.unwrap_or_else(|| DEFAULT_AUTH.into()) })
}

/// Binds, writes a fresh auth file, prints `created`, then serves until
/// `stop`. Returns the exit code.
pub fn bank(args: &[String], cwd: &Path, flavor: Flavor, stop: &AtomicBool, out: &mut dyn Write) -> i32 {
    let Ok(a) = parse_bank(args) else { return EXIT_FAILURE };
    let Ok(listener) = TcpListener::bind((Ipv4Addr::LOCALHOST, a.port)) else { return EXIT_FAILURE };
    let mut key = [0u8; AUTH_LEN];
    rand::rng().fill_bytes(&mut key);
    let written = OpenOptions::new()
        .write(true)
        .create_new(true)
        .open(cwd.join(&a.auth))
        .and_then(|mut f| f.write_all(&key).and_then(|_| f.sync_all()));
    if written.is_err() {
        return EXIT_FAILURE;
    }
    let _ = writeln!(out, "created");
    let _ = out.flush();
    bank::serve(listener, flavor, &key, stop, out);
    EXIT_OK
}

static TERMINATED: AtomicBool = AtomicBool::new(false);

extern "C" fn on_term(_: libc::c_int) {
    TERMINATED.store(true, Ordering::Relaxed);
}

/// Routes SIGTERM and SIGINT to a flag so the bank exits cleanly.
pub fn termination_flag() -> &'static AtomicBool {
    unsafe {
        libc::signal(libc::SIGTERM, on_term as *const () as libc::sighandler_t);
        libc::signal(libc::SIGINT, on_term as *const () as libc::sighandler_t);
    }
    &TERMINATED
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn parses_paper_invocations() {
        let a = parse_atm(&argv("-s bank.auth -c bob.card -a bob -n 1000.00")).unwrap();
        assert_eq!((a.port, a.ip, a.mode), (3000, Ipv4Addr::LOCALHOST, Mode::Create(Amount(100000))));
        let w = parse_atm(&argv("-a bob -w 63.10")).unwrap();
        assert_eq!((w.card.as_str(), w.auth.as_str(), w.mode), ("bob.card", "bank.auth", Mode::Withdraw(Amount(6310))));
        assert_eq!(parse_atm(&w.to_args()).unwrap(), w);
    }

    #[test]
    fn rejects_bad_invocations() {
        for bad in [
            "-a bob",
            "-a bob -g -g",
            "-a bob -n 1 -d 2",
            "-a Bob -g",
            "-a bob -a bob -g",
            "-a bob -p 1023 -g",
            "-a bob -p 03000 -g",
            "-a bob -i 1.2.3 -g",
            "-a bob -i 01.2.3.4 -g",
            "-a bob -c .. -g",
            "-a bob -c a/b -g",
            "-a bob -d 0.00",
            "-a bob -w 1.234",
            "-a bob -g extra",
            "-a",
        ] {
            assert_eq!(parse_atm(&argv(bad)), Err(Invalid), "{bad}");
        }
        assert!(parse_bank(&argv("-p 3000 -p 3001")).is_err());
        assert_eq!(parse_bank(&[]).unwrap(), BankArgs { port: 3000, auth: "bank.auth".into() });
    }
}
