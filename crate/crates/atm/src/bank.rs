use std::collections::BTreeMap;
use std::io::Write;
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::currency::{Amount, MAX_AMOUNT};
use crate::wire::{Channel, Flavor, ProtocolError};

/// Per-connection read/write deadline.
pub const IO_TIMEOUT: Duration = Duration::from_secs(10);
pub const AUTH_LEN: usize = 32;
pub const CARD_LEN: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Create,
    Deposit,
    Withdraw,
    Balance,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub op: Op,
    pub account: String,
    /// Hex-encoded card secret.
    pub card: String,
    #[serde(default)]
    pub amount: Option<Amount>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Response {
    pub ok: bool,
    #[serde(default)]
    pub receipt: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Account {
    balance: Amount,
    card_digest: [u8; 32],
}

/// Account book. Each request either applies entirely or not at all.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Bank {
    accounts: BTreeMap<String, Account>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Refused;

fn digest(card: &str) -> [u8; 32] {
    Sha256::digest(card.as_bytes()).into()
}

pub fn receipt(account: &str, key: &str, value: Amount) -> String {
    format!("{{\"account\":{},\"{key}\":{}}}", serde_json::to_string(account).expect("strings serialize"), value.render())
}

impl Bank {
    pub fn balance(&self, account: &str) -> Option<Amount> {
        self.accounts.get(account).map(|a| a.balance)
    }

    pub fn accounts(&self) -> impl Iterator<Item = (&str, Amount)> {
        self.accounts.iter().map(|(k, v)| (k.as_str(), v.balance))
    }

    pub fn apply(&mut self, req: &Request) -> Result<String, Refused> {
        if req.op == Op::Create {
            let amount = req.amount.ok_or(Refused)?;
            if self.accounts.contains_key(&req.account) || req.card.is_empty() {
                return Err(Refused);
            }
            self.accounts.insert(req.account.clone(), Account { balance: amount, card_digest: digest(&req.card) });
            return Ok(receipt(&req.account, "initial_balance", amount));
        }
        let acct = self.accounts.get_mut(&req.account).ok_or(Refused)?;
        if acct.card_digest != digest(&req.card) {
            return Err(Refused);
        }
        match req.op {
            Op::Create => unreachable!(),
            Op::Deposit => {
                let amount = req.amount.filter(|a| *a > Amount::ZERO).ok_or(Refused)?;
                acct.balance = acct.balance.checked_add(amount).filter(|b| *b <= MAX_AMOUNT).ok_or(Refused)?;
                Ok(receipt(&req.account, "deposit", amount))
            }
            Op::Withdraw => {
                let amount = req.amount.filter(|a| *a > Amount::ZERO).ok_or(Refused)?;
                acct.balance = acct.balance.checked_sub(amount).ok_or(Refused)?;
                Ok(receipt(&req.account, "withdraw", amount))
            }
            Op::Balance => Ok(receipt(&req.account, "balance", acct.balance)),
        }
    }
}

/// Handles one connection. Protocol faults leave the bank untouched.
pub fn handle(bank: &mut Bank, flavor: Flavor, stream: TcpStream, auth: &[u8], log: &mut dyn Write) {
    let _ = stream.set_read_timeout(Some(IO_TIMEOUT));
    let _ = stream.set_write_timeout(Some(IO_TIMEOUT));
    let result = (|| -> Result<(), ProtocolError> {
        let mut ch = Channel::server(flavor, stream, auth)?;
        let raw = ch.recv()?;
        let req: Request = serde_json::from_slice(&raw).map_err(|_| ProtocolError::Malformed)?;
        let mut next = bank.clone();
        let response = match next.apply(&req) {
            Ok(r) => Response { ok: true, receipt: Some(r) },
            Err(Refused) => Response { ok: false, receipt: None },
        };
        ch.send(&serde_json::to_vec(&response).expect("response serializes"))?;
        // Commit only once the reply is on its way.
        *bank = next;
        if let Some(r) = &response.receipt {
            let _ = writeln!(log, "{r}");
        }
        Ok(())
    })();
    if result.is_err() {
        let _ = writeln!(log, "protocol_error");
    }
    let _ = log.flush();
}

/// Serves connections one at a time until `stop` is set.
pub fn serve(listener: TcpListener, flavor: Flavor, auth: &[u8], stop: &AtomicBool, log: &mut dyn Write) -> Bank {
    let mut bank = Bank::default();
    listener.set_nonblocking(true).expect("nonblocking listener");
    while !stop.load(Ordering::Relaxed) {
        match listener.accept() {
            Ok((stream, _)) => {
                let _ = stream.set_nonblocking(false);
                handle(&mut bank, flavor, stream, auth, log);
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => std::thread::sleep(Duration::from_millis(5)),
            Err(_) => std::thread::sleep(Duration::from_millis(5)),
        }
    }
    bank
}
