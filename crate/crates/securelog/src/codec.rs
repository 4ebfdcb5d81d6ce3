//! On-disk log formats.
//!
//! The oracle format is
//! `"BIBL1" | salt[16] | nonce[12] | ciphertext | tag[16]`, where the AEAD
//! is ChaCha20-Poly1305 keyed by PBKDF2-HMAC-SHA256(token, salt), the
//! associated data is the 33-byte header, and the plaintext is the whole
//! serialized event list. Every write draws a fresh nonce.

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use rand::RngCore;
use sha2::{Digest, Sha256};

use crate::model::{Action, Event, Kind, Person};

pub const MAGIC: &[u8; 5] = b"BIBL1";
pub const SALT_LEN: usize = 16;
pub const NONCE_LEN: usize = 12;
pub const TAG_LEN: usize = 16;
pub const HEADER_LEN: usize = MAGIC.len() + SALT_LEN + NONCE_LEN;
pub const KDF_ROUNDS: u32 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IntegrityError;

/// A decoded log plus whatever the codec needs to rewrite it.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub events: Vec<Event>,
    salt: [u8; SALT_LEN],
}

pub trait Codec {
    fn load(&self, bytes: &[u8], token: &str) -> Result<Loaded, IntegrityError>;
    /// Serializes `events`; `previous` is the log being replaced, if any.
    fn store(&self, events: &[Event], token: &str, previous: Option<&Loaded>) -> Vec<u8>;
}

pub fn derive_key(token: &str, salt: &[u8]) -> [u8; 32] {
    let mut key = [0u8; 32];
    pbkdf2::pbkdf2_hmac::<Sha256>(token.as_bytes(), salt, KDF_ROUNDS, &mut key);
    key
}

fn fresh<const N: usize>() -> [u8; N] {
    let mut b = [0u8; N];
    rand::rng().fill_bytes(&mut b);
    b
}

fn seal(key: &[u8; 32], nonce: &[u8; NONCE_LEN], aad: &[u8], plain: &[u8]) -> Vec<u8> {
    ChaCha20Poly1305::new(Key::from_slice(key))
        .encrypt(Nonce::from_slice(nonce), Payload { msg: plain, aad })
        .expect("in-memory encryption cannot fail")
}

fn open(key: &[u8; 32], nonce: &[u8], aad: &[u8], sealed: &[u8]) -> Result<Vec<u8>, IntegrityError> {
    ChaCha20Poly1305::new(Key::from_slice(key))
        .decrypt(Nonce::from_slice(nonce), Payload { msg: sealed, aad })
        .map_err(|_| IntegrityError)
}

/// The oracle: one AEAD over the entire log.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sealed;

impl Codec for Sealed {
    fn load(&self, bytes: &[u8], token: &str) -> Result<Loaded, IntegrityError> {
        if bytes.len() < HEADER_LEN + TAG_LEN || &bytes[..MAGIC.len()] != MAGIC {
            return Err(IntegrityError);
        }
        let (header, body) = bytes.split_at(HEADER_LEN);
        let salt: [u8; SALT_LEN] = header[MAGIC.len()..MAGIC.len() + SALT_LEN].try_into().unwrap();
        let nonce = &header[MAGIC.len() + SALT_LEN..];
        let plain = open(&derive_key(token, &salt), nonce, header, body)?;
        Ok(Loaded { events: decode_events(&plain).ok_or(IntegrityError)?, salt })
    }

    fn store(&self, events: &[Event], token: &str, previous: Option<&Loaded>) -> Vec<u8> {
        let salt = previous.map_or_else(fresh::<SALT_LEN>, |p| p.salt);
        let nonce = fresh::<NONCE_LEN>();
        let mut out = Vec::with_capacity(HEADER_LEN + TAG_LEN + events.len() * 16);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&salt);
        out.extend_from_slice(&nonce);
        let body = seal(&derive_key(token, &salt), &nonce, &out, &encode_events(events));
        out.extend_from_slice(&body);
        out
    }
}

/// Fixture: no protection at all. The token is stored next to the events.
#[derive(Clone, Copy, Debug, Default)]
pub struct Plaintext;

impl Codec for Plaintext {
    fn load(&self, bytes: &[u8], token: &str) -> Result<Loaded, IntegrityError> {
        let text = std::str::from_utf8(bytes).map_err(|_| IntegrityError)?;
        let mut lines = text.lines();
        if lines.next() != Some(token) {
            return Err(IntegrityError);
        }
        let events = lines.map(parse_text_event).collect::<Option<Vec<_>>>().ok_or(IntegrityError)?;
        Ok(Loaded { events, salt: [0; SALT_LEN] })
    }

    fn store(&self, events: &[Event], token: &str, _previous: Option<&Loaded>) -> Vec<u8> {
        let mut out = format!("{token}\n");
        for e in events {
            out.push_str(&text_event(e));
            out.push('\n');
        }
        out.into_bytes()
    }
}

/// Human-readable form of one event, as the plaintext fixture stores it:
/// `<ts> <E|G> <name> <A|L> [room]`.
pub fn text_event(e: &Event) -> String {
    let kind = if e.person.kind == Kind::Employee { "E" } else { "G" };
    let action = if e.action == Action::Arrive { "A" } else { "L" };
    match e.room {
        Some(r) => format!("{} {kind} {} {action} {r}", e.ts, e.person.name),
        None => format!("{} {kind} {} {action}", e.ts, e.person.name),
    }
}

pub fn parse_text_event(line: &str) -> Option<Event> {
    let parts: Vec<&str> = line.split(' ').collect();
    if !(4..=5).contains(&parts.len()) {
        return None;
    }
    let kind = match parts[1] {
        "E" => Kind::Employee,
        "G" => Kind::Guest,
        _ => return None,
    };
    let action = match parts[3] {
        "A" => Action::Arrive,
        "L" => Action::Leave,
        _ => return None,
    };
    let room = match parts.get(4) {
        Some(r) => Some(r.parse().ok()?),
        None => None,
    };
    Some(Event { ts: parts[0].parse().ok()?, person: Person::new(kind, parts[2]), action, room })
}

/// Fixture: each record sealed on its own, so records can be dropped,
/// duplicated or reordered without detection.
#[derive(Clone, Copy, Debug, Default)]
pub struct PerRecord;

const PER_RECORD_MAGIC: &[u8; 5] = b"BIBR1";

impl Codec for PerRecord {
    fn load(&self, bytes: &[u8], token: &str) -> Result<Loaded, IntegrityError> {
        if bytes.len() < PER_RECORD_MAGIC.len() + SALT_LEN || &bytes[..PER_RECORD_MAGIC.len()] != PER_RECORD_MAGIC {
            return Err(IntegrityError);
        }
        let salt: [u8; SALT_LEN] = bytes[5..5 + SALT_LEN].try_into().unwrap();
        let key = derive_key(token, &salt);
        let mut rest = &bytes[5 + SALT_LEN..];
        let mut events = Vec::new();
        while !rest.is_empty() {
            if rest.len() < 4 + NONCE_LEN {
                return Err(IntegrityError);
            }
            let len = u32::from_be_bytes(rest[..4].try_into().unwrap()) as usize;
            let (nonce, tail) = rest[4..].split_at(NONCE_LEN);
            if tail.len() < len {
                return Err(IntegrityError);
            }
            let plain = open(&key, nonce, PER_RECORD_MAGIC, &tail[..len])?;
            let mut evs = decode_events(&plain).ok_or(IntegrityError)?;
            events.append(&mut evs);
            rest = &tail[len..];
        }
        Ok(Loaded { events, salt })
    }

    fn store(&self, events: &[Event], token: &str, previous: Option<&Loaded>) -> Vec<u8> {
        let salt = previous.map_or_else(fresh::<SALT_LEN>, |p| p.salt);
        let key = derive_key(token, &salt);
        let mut out = PER_RECORD_MAGIC.to_vec();
        out.extend_from_slice(&salt);
        for e in events {
            let nonce = fresh::<NONCE_LEN>();
            let body = seal(&key, &nonce, PER_RECORD_MAGIC, &encode_events(std::slice::from_ref(e)));
            out.extend_from_slice(&(body.len() as u32).to_be_bytes());
            out.extend_from_slice(&nonce);
            out.extend_from_slice(&body);
        }
        out
    }
}

/// Fixture: only the first two characters of the token feed a single
/// SHA-256, leaving a 62^2 key space.
#[derive(Clone, Copy, Debug, Default)]
pub struct TruncatedToken;

const TRUNCATED_MAGIC: &[u8; 5] = b"BIBT1";

pub fn truncated_key(token: &str) -> [u8; 32] {
    let prefix: String = token.chars().take(2).collect();
    Sha256::digest(prefix.as_bytes()).into()
}

impl TruncatedToken {
    /// Decrypts with an explicit key; used by the brute-force breaker.
    pub fn load_with_key(bytes: &[u8], key: &[u8; 32]) -> Result<Vec<Event>, IntegrityError> {
        if bytes.len() < 5 + NONCE_LEN + TAG_LEN || &bytes[..5] != TRUNCATED_MAGIC {
            return Err(IntegrityError);
        }
        let (header, body) = bytes.split_at(5 + NONCE_LEN);
        let plain = open(key, &header[5..], header, body)?;
        decode_events(&plain).ok_or(IntegrityError)
    }
}

impl Codec for TruncatedToken {
    fn load(&self, bytes: &[u8], token: &str) -> Result<Loaded, IntegrityError> {
        Ok(Loaded { events: Self::load_with_key(bytes, &truncated_key(token))?, salt: [0; SALT_LEN] })
    }

    fn store(&self, events: &[Event], token: &str, _previous: Option<&Loaded>) -> Vec<u8> {
        let nonce = fresh::<NONCE_LEN>();
        let mut out = TRUNCATED_MAGIC.to_vec();
        out.extend_from_slice(&nonce);
        let body = seal(&truncated_key(token), &nonce, &out, &encode_events(events));
        out.extend_from_slice(&body);
        out
    }
}

/// Binary event list: `count: u32`, then per event
/// `ts: u64 | flags: u8 | [room: u64] | name_len: u16 | name`.
/// Flags: bit 0 employee, bit 1 leave, bit 2 has room.
pub fn encode_events(events: &[Event]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + events.len() * 24);
    out.extend_from_slice(&(events.len() as u32).to_be_bytes());
    for e in events {
        out.extend_from_slice(&e.ts.to_be_bytes());
        let mut flags = 0u8;
        if e.person.kind == Kind::Employee {
            flags |= 1;
        }
        if e.action == Action::Leave {
            flags |= 2;
        }
        if e.room.is_some() {
            flags |= 4;
        }
        out.push(flags);
        if let Some(r) = e.room {
            out.extend_from_slice(&r.to_be_bytes());
        }
        out.extend_from_slice(&(e.person.name.len() as u16).to_be_bytes());
        out.extend_from_slice(e.person.name.as_bytes());
    }
    out
}

pub fn decode_events(mut bytes: &[u8]) -> Option<Vec<Event>> {
    fn take<'a>(bytes: &mut &'a [u8], n: usize) -> Option<&'a [u8]> {
        if bytes.len() < n {
            return None;
        }
        let (head, tail) = bytes.split_at(n);
        *bytes = tail;
        Some(head)
    }
    let count = u32::from_be_bytes(take(&mut bytes, 4)?.try_into().ok()?) as usize;
    let mut events = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let ts = u64::from_be_bytes(take(&mut bytes, 8)?.try_into().ok()?);
        let flags = take(&mut bytes, 1)?[0];
        if flags & !7 != 0 {
            return None;
        }
        let room =
            if flags & 4 != 0 { Some(u64::from_be_bytes(take(&mut bytes, 8)?.try_into().ok()?)) } else { None };
        let len = u16::from_be_bytes(take(&mut bytes, 2)?.try_into().ok()?) as usize;
        let name = std::str::from_utf8(take(&mut bytes, len)?).ok()?.to_owned();
        let kind = if flags & 1 != 0 { Kind::Employee } else { Kind::Guest };
        let action = if flags & 2 != 0 { Action::Leave } else { Action::Arrive };
        events.push(Event { ts, person: Person { kind, name }, action, room });
    }
    bytes.is_empty().then_some(events)
}
