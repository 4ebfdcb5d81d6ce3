//! Framing and the three channel flavours.
//!
//! Every message is a frame: `len: u32 BE | payload`. The oracle channel
//! first runs a handshake authenticated by the auth-file key `K`:
//!
//! ```text
//! atm  -> bank  "BATM" | 0x01 | nc[32]
//! bank -> atm   ns[32] | HMAC(K, "bank" | nc | ns)
//! atm  -> bank  HMAC(K, "atm" | nc | ns)
//! ```
//!
//! Directional keys come from HKDF-SHA256(salt = nc | ns, ikm = K). Data
//! frames are `seq: u64 BE | ChaCha20-Poly1305(ct | tag)` with nonce
//! `0^4 | seq` and associated data `version | session-id | seq | direction`.
//! A receiver accepts only the next sequence number. Sealed plaintexts are
//! `len: u16 BE | msg | zeros`, padded to [`PADDED_LEN`] so lengths leak nothing.

use std::io::{self, Read, Write};
use std::net::TcpStream;

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use hkdf::Hkdf;
use hmac::{Hmac, Mac};
use rand::RngCore;
use sha2::{Digest, Sha256};

pub const MAX_FRAME: usize = 64 * 1024;
pub const VERSION: u8 = 1;
pub const PADDED_LEN: usize = 1024;
const HELLO_MAGIC: &[u8; 4] = b"BATM";
const NONCE_LEN: usize = 32;

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("transport: {0}")]
    Io(#[from] io::Error),
    #[error("malformed frame")]
    Malformed,
    #[error("authentication failed")]
    Auth,
    #[error("unexpected sequence number")]
    Sequence,
}

/// Which protocol an implementation speaks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Flavor {
    Oracle,
    /// One static key and a fixed nonce: authenticated but replayable.
    NonceFree,
    /// No cryptography at all.
    Plaintext,
}

impl Flavor {
    pub const ALL: [Flavor; 3] = [Flavor::Oracle, Flavor::NonceFree, Flavor::Plaintext];

    pub fn name(&self) -> &'static str {
        match self {
            Flavor::Oracle => "oracle",
            Flavor::NonceFree => "nonce-free",
            Flavor::Plaintext => "plaintext",
        }
    }
}

impl std::str::FromStr for Flavor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Flavor::ALL.into_iter().find(|f| f.name() == s).ok_or_else(|| format!("unknown variant {s:?}"))
    }
}

pub fn write_frame(w: &mut impl Write, payload: &[u8]) -> io::Result<()> {
    if payload.len() > MAX_FRAME {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "frame too large"));
    }
    let mut buf = Vec::with_capacity(4 + payload.len());
    buf.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    buf.extend_from_slice(payload);
    w.write_all(&buf)?;
    w.flush()
}

pub fn read_frame(r: &mut impl Read) -> Result<Vec<u8>, ProtocolError> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME {
        return Err(ProtocolError::Malformed);
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

/// Splits a captured byte stream into frame payloads, ignoring a partial tail.
pub fn split_frames(mut bytes: &[u8]) -> Vec<&[u8]> {
    let mut out = Vec::new();
    while bytes.len() >= 4 {
        let len = u32::from_be_bytes(bytes[..4].try_into().unwrap()) as usize;
        if bytes.len() < 4 + len {
            break;
        }
        out.push(&bytes[4..4 + len]);
        bytes = &bytes[4 + len..];
    }
    out
}

fn mac(key: &[u8], label: &[u8], nc: &[u8], ns: &[u8]) -> [u8; 32] {
    let mut m = <Hmac<Sha256> as Mac>::new_from_slice(key).expect("hmac takes any key length");
    m.update(label);
    m.update(nc);
    m.update(ns);
    m.finalize().into_bytes().into()
}

fn verify_mac(key: &[u8], label: &[u8], nc: &[u8], ns: &[u8], tag: &[u8]) -> Result<(), ProtocolError> {
    let mut m = <Hmac<Sha256> as Mac>::new_from_slice(key).expect("hmac takes any key length");
    m.update(label);
    m.update(nc);
    m.update(ns);
    m.verify_slice(tag).map_err(|_| ProtocolError::Auth)
}

fn random<const N: usize>() -> [u8; N] {
    let mut b = [0u8; N];
    rand::rng().fill_bytes(&mut b);
    b
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Role {
    Atm,
    Bank,
}

struct Sealed {
    send: ChaCha20Poly1305,
    recv: ChaCha20Poly1305,
    send_seq: u64,
    recv_seq: u64,
    session: [u8; 32],
    role: Role,
}

enum Mode {
    Sealed(Box<Sealed>),
    Static(ChaCha20Poly1305),
    Plain,
}

pub struct Channel {
    stream: TcpStream,
    mode: Mode,
}

fn aad(session: &[u8; 32], seq: u64, from: Role) -> Vec<u8> {
    let mut a = Vec::with_capacity(42);
    a.push(VERSION);
    a.extend_from_slice(session);
    a.extend_from_slice(&seq.to_be_bytes());
    a.push(if from == Role::Atm { 0 } else { 1 });
    a
}

fn pad(msg: &[u8]) -> Result<Vec<u8>, ProtocolError> {
    if msg.len() + 2 > PADDED_LEN {
        return Err(ProtocolError::Malformed);
    }
    let mut out = vec![0u8; PADDED_LEN];
    out[..2].copy_from_slice(&(msg.len() as u16).to_be_bytes());
    out[2..2 + msg.len()].copy_from_slice(msg);
    Ok(out)
}

fn unpad(mut padded: Vec<u8>) -> Result<Vec<u8>, ProtocolError> {
    if padded.len() != PADDED_LEN {
        return Err(ProtocolError::Malformed);
    }
    let len = u16::from_be_bytes([padded[0], padded[1]]) as usize;
    if len + 2 > PADDED_LEN {
        return Err(ProtocolError::Malformed);
    }
    padded.truncate(2 + len);
    padded.drain(..2);
    Ok(padded)
}

fn seq_nonce(seq: u64) -> [u8; 12] {
    let mut n = [0u8; 12];
    n[4..].copy_from_slice(&seq.to_be_bytes());
    n
}

fn session_keys(auth: &[u8], nc: &[u8], ns: &[u8]) -> (ChaCha20Poly1305, ChaCha20Poly1305, [u8; 32]) {
    let salt = [nc, ns].concat();
    let hk = Hkdf::<Sha256>::new(Some(&salt), auth);
    let (mut a2b, mut b2a) = ([0u8; 32], [0u8; 32]);
    hk.expand(b"bibifi-atm atm->bank", &mut a2b).expect("32 bytes is a valid length");
    hk.expand(b"bibifi-atm bank->atm", &mut b2a).expect("32 bytes is a valid length");
    let session: [u8; 32] = Sha256::digest(&salt).into();
    (ChaCha20Poly1305::new(Key::from_slice(&a2b)), ChaCha20Poly1305::new(Key::from_slice(&b2a)), session)
}

fn static_cipher(auth: &[u8]) -> ChaCha20Poly1305 {
    let hk = Hkdf::<Sha256>::new(Some(b"static"), auth);
    let mut k = [0u8; 32];
    hk.expand(b"bibifi-atm nonce-free", &mut k).expect("32 bytes is a valid length");
    ChaCha20Poly1305::new(Key::from_slice(&k))
}

impl Channel {
    /// ATM side: authenticates the bank before anything is sent.
    pub fn client(flavor: Flavor, mut stream: TcpStream, auth: &[u8]) -> Result<Channel, ProtocolError> {
        stream.set_nodelay(true)?;
        let mode = match flavor {
            Flavor::Plaintext => Mode::Plain,
            Flavor::NonceFree => Mode::Static(static_cipher(auth)),
            Flavor::Oracle => {
                let nc = random::<NONCE_LEN>();
                let mut hello = HELLO_MAGIC.to_vec();
                hello.push(VERSION);
                hello.extend_from_slice(&nc);
                write_frame(&mut stream, &hello)?;
                let reply = read_frame(&mut stream)?;
                if reply.len() != NONCE_LEN + 32 {
                    return Err(ProtocolError::Malformed);
                }
                let (ns, tag) = reply.split_at(NONCE_LEN);
                verify_mac(auth, b"bank", &nc, ns, tag)?;
                write_frame(&mut stream, &mac(auth, b"atm", &nc, ns))?;
                let (send, recv, session) = session_keys(auth, &nc, ns);
                Mode::Sealed(Box::new(Sealed { send, recv, send_seq: 0, recv_seq: 0, session, role: Role::Atm }))
            }
        };
        Ok(Channel { stream, mode })
    }

    /// Bank side.
    pub fn server(flavor: Flavor, mut stream: TcpStream, auth: &[u8]) -> Result<Channel, ProtocolError> {
        stream.set_nodelay(true)?;
        let mode = match flavor {
            Flavor::Plaintext => Mode::Plain,
            Flavor::NonceFree => Mode::Static(static_cipher(auth)),
            Flavor::Oracle => {
                let hello = read_frame(&mut stream)?;
                if hello.len() != HELLO_MAGIC.len() + 1 + NONCE_LEN
                    || &hello[..4] != HELLO_MAGIC
                    || hello[4] != VERSION
                {
                    return Err(ProtocolError::Malformed);
                }
                let nc = &hello[5..];
                let ns = random::<NONCE_LEN>();
                let mut reply = ns.to_vec();
                reply.extend_from_slice(&mac(auth, b"bank", nc, &ns));
                write_frame(&mut stream, &reply)?;
                let finish = read_frame(&mut stream)?;
                verify_mac(auth, b"atm", nc, &ns, &finish)?;
                let (recv, send, session) = session_keys(auth, nc, &ns);
                Mode::Sealed(Box::new(Sealed { send, recv, send_seq: 0, recv_seq: 0, session, role: Role::Bank }))
            }
        };
        Ok(Channel { stream, mode })
    }

    pub fn stream(&self) -> &TcpStream {
        &self.stream
    }

    pub fn send(&mut self, msg: &[u8]) -> Result<(), ProtocolError> {
        let frame = match &mut self.mode {
            Mode::Plain => msg.to_vec(),
            Mode::Static(c) => {
                c.encrypt(Nonce::from_slice(&[0u8; 12]), msg).map_err(|_| ProtocolError::Malformed)?
            }
            Mode::Sealed(s) => {
                let seq = s.send_seq;
                s.send_seq += 1;
                let padded = pad(msg)?;
                let ct = s
                    .send
                    .encrypt(Nonce::from_slice(&seq_nonce(seq)), Payload { msg: &padded, aad: &aad(&s.session, seq, s.role) })
                    .map_err(|_| ProtocolError::Malformed)?;
                let mut f = seq.to_be_bytes().to_vec();
                f.extend_from_slice(&ct);
                f
            }
        };
        write_frame(&mut self.stream, &frame)?;
        Ok(())
    }

    pub fn recv(&mut self) -> Result<Vec<u8>, ProtocolError> {
        let frame = read_frame(&mut self.stream)?;
        match &mut self.mode {
            Mode::Plain => Ok(frame),
            Mode::Static(c) => c.decrypt(Nonce::from_slice(&[0u8; 12]), frame.as_slice()).map_err(|_| ProtocolError::Auth),
            Mode::Sealed(s) => {
                if frame.len() < 8 {
                    return Err(ProtocolError::Malformed);
                }
                let seq = u64::from_be_bytes(frame[..8].try_into().unwrap());
                if seq != s.recv_seq {
                    return Err(ProtocolError::Sequence);
                }
                let peer = if s.role == Role::Atm { Role::Bank } else { Role::Atm };
                let plain = s
                    .recv
                    .decrypt(Nonce::from_slice(&seq_nonce(seq)), Payload { msg: &frame[8..], aad: &aad(&s.session, seq, peer) })
                    .map_err(|_| ProtocolError::Auth)?;
                s.recv_seq += 1;
                unpad(plain)
            }
        }
    }
}
