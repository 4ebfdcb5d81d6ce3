//! TCP front end: one connection at a time, one program per connection.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{Shutdown, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use crate::interp::{Interpreter, Outcome, Status};

pub const MAX_PROGRAM: usize = 1 << 20;
pub const BUDGET: Duration = Duration::from_secs(30);
pub const DEFAULT_ADMIN_PASSWORD: &str = "admin";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ServeEnd {
    Exited,
    Crashed,
    Stopped,
}

/// Reads up to and including a `***` line. `None` means the input was oversized
/// or not text.
pub fn read_program(stream: &TcpStream) -> std::io::Result<Option<String>> {
    // Oversized input is still drained (up to a hard cap) so the client sees the reply.
    let mut reader = BufReader::new(stream.take(64 * MAX_PROGRAM as u64));
    let mut buf = Vec::new();
    let mut oversized = false;
    let mut line = Vec::new();
    loop {
        line.clear();
        if reader.read_until(b'\n', &mut line)? == 0 {
            break;
        }
        if !oversized {
            buf.extend_from_slice(&line);
            oversized = buf.len() > MAX_PROGRAM;
        }
        if line.trim_ascii() == b"***" {
            break;
        }
    }
    if oversized {
        return Ok(None);
    }
    Ok(String::from_utf8(buf).ok())
}

/// Runs one program against `interp` and answers on the same stream.
pub fn handle(mut stream: TcpStream, interp: &mut Interpreter) -> std::io::Result<Outcome> {
    stream.set_nodelay(true)?;
    stream.set_read_timeout(Some(BUDGET))?;
    let outcome = match read_program(&stream)? {
        Some(text) => interp.run_text(&text, Some(Instant::now() + BUDGET)),
        None => Outcome::Failed,
    };
    if let Some(text) = outcome.text() {
        stream.write_all(text.as_bytes())?;
    }
    let _ = stream.shutdown(Shutdown::Both);
    Ok(outcome)
}

/// Serves until an admin `exit`, a fixture crash, or `stop` is raised.
pub fn serve(listener: TcpListener, interp: &mut Interpreter, stop: &AtomicBool) -> std::io::Result<ServeEnd> {
    listener.set_nonblocking(true)?;
    loop {
        if stop.load(Ordering::Relaxed) {
            return Ok(ServeEnd::Stopped);
        }
        let stream = match listener.accept() {
            Ok((s, _)) => s,
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                std::thread::sleep(Duration::from_millis(2));
                continue;
            }
            Err(e) => return Err(e),
        };
        stream.set_nonblocking(false)?;
        match handle(stream, interp) {
            Ok(Outcome::Done { exit: true, .. }) => return Ok(ServeEnd::Exited),
            Ok(Outcome::Crashed) => return Ok(ServeEnd::Crashed),
            _ => {}
        }
    }
}

/// The `server <port> [admin-password]` command line.
pub fn parse_args(args: &[String]) -> Result<(u16, String), String> {
    match args {
        [port] | [port, _] => {
            let port: u16 = port.parse().map_err(|_| format!("bad port {port}"))?;
            let pw = args.get(1).cloned().unwrap_or_else(|| DEFAULT_ADMIN_PASSWORD.into());
            if pw.len() > crate::parse::MAX_STRING || !pw.bytes().all(|b| (0x20..0x7f).contains(&b) && b != b'"') {
                return Err("bad admin password".into());
            }
            Ok((port, pw))
        }
        _ => Err("usage: server <port> [admin-password]".into()),
    }
}

/// Sends a program and collects the reply lines. `None` when the server
/// closes without answering.
pub fn submit(port: u16, program: &str, timeout: Duration) -> std::io::Result<Option<Vec<String>>> {
    let mut s = TcpStream::connect(("127.0.0.1", port))?;
    s.set_nodelay(true)?;
    s.set_read_timeout(Some(timeout))?;
    s.write_all(program.as_bytes())?;
    let _ = s.shutdown(Shutdown::Write);
    let mut reply = String::new();
    match s.read_to_string(&mut reply) {
        Ok(_) => {}
        Err(e) if matches!(e.kind(), std::io::ErrorKind::ConnectionReset) => return Ok(None),
        Err(e) => return Err(e),
    }
    if reply.is_empty() {
        return Ok(None);
    }
    Ok(Some(reply.lines().map(String::from).collect()))
}

pub fn failed_line() -> String {
    Status::Failed.to_string()
}
