//! The oracle and fixture executables, driven as separate processes.

mod common;

use std::io::{BufRead, BufReader};
use std::os::unix::process::ExitStatusExt;
use std::process::{Command, Stdio};
use std::time::Duration;

use bibifi_ehr::server::submit;
use common::{crash_programs, exe, prog};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn run(dir: &std::path::Path, program: &str, args: &str) -> (Option<i32>, String) {
    let out = Command::new(exe(program)).args(args.split_whitespace()).current_dir(dir).output().unwrap();
    (out.status.code(), String::from_utf8(out.stdout).unwrap())
}

#[test]
fn logappend_and_logread_processes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(run(d, "logappend", "-K secret -A -G Fred logfile"), (Some(0), String::new()));
    assert_eq!(run(d, "logappend", "-K secret -A -G Fred -R 1 logfile"), (Some(0), String::new()));
    assert_eq!(run(d, "logappend", "-K other -A -G Jill logfile"), (Some(255), "invalid\n".into()));
    assert_eq!(run(d, "logread", "-K secret -S logfile"), (Some(0), "Fred\n1: Fred\n".into()));
    assert_eq!(run(d, "logread", "-K nope -S logfile"), (Some(255), "integrity violation\n".into()));
    assert_eq!(run(d, "logread", "-S"), (Some(255), "invalid\n".into()));
    let bytes = std::fs::read(d.join("logfile")).unwrap();
    assert_eq!(&bytes[..5], b"BIBL1");
    assert!(!String::from_utf8_lossy(&bytes).contains("Fred"));
}

#[test]
fn securelog_crash_fixture_dies_by_signal() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let fixture = |args: &str| {
        let mut v = vec!["crash"];
        v.extend(args.split_whitespace());
        Command::new(exe("securelog-fixture")).args(&v).current_dir(d).output().unwrap()
    };
    assert!(fixture("logappend -T 1 -K k -A -G Ann log").status.success());
    assert!(fixture("logappend -T 2 -K k -L -G Ann log").status.success());
    let out = fixture("logread -K k -S log");
    assert_eq!(out.status.signal(), Some(11), "SIGSEGV");
}

fn guest(i: usize) -> String {
    let mut n = i;
    let mut s = String::from("G");
    loop {
        s.push((b'a' + (n % 26) as u8) as char);
        n /= 26;
        if n == 0 {
            return s;
        }
    }
}

fn guests_on_record(dir: &std::path::Path) -> usize {
    let (code, out) = run(dir, "logread", "-K tok -S log");
    assert_eq!(code, Some(0), "log unreadable after a kill: {out}");
    // One name per line, then room lines.
    out.lines().filter(|l| !l.contains(':')).count()
}

/// A logappend killed at any point leaves the log either as it was or with
/// the new event, never unreadable.
#[test]
fn killed_logappend_leaves_a_readable_log() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for i in 0..150 {
        assert_eq!(run(d, "logappend", &format!("-T {} -K tok -A -G {} log", i + 1, guest(i))).0, Some(0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut committed = 150;
    let (mut killed, mut finished) = (0, 0);
    for i in 150..230 {
        let mut child = Command::new(exe("logappend"))
            .args(["-T", &(i + 1).to_string(), "-K", "tok", "-A", "-G", &guest(i), "log"])
            .current_dir(d)
            .stdout(Stdio::null())
            .spawn()
            .unwrap();
        std::thread::sleep(Duration::from_micros(rng.random_range(0..4000)));
        let done = child.try_wait().unwrap();
        if done.is_none() {
            child.kill().unwrap();
        }
        let status = child.wait().unwrap();
        let now = guests_on_record(d);
        assert!(now == committed || now == committed + 1, "{committed} -> {now}");
        if status.success() {
            assert_eq!(now, committed + 1, "a successful append must persist");
            finished += 1;
        } else {
            killed += 1;
        }
        committed = now;
    }
    assert!(killed > 0 && finished > 0, "timing never interrupted an append ({killed} killed, {finished} finished)");
}

fn spawn_bank(dir: &std::path::Path, program: &str, prefix: &[&str], port: u16) -> std::process::Child {
    let mut bank = Command::new(exe(program))
        .args(prefix)
        .args(["-p", &port.to_string()])
        .current_dir(dir)
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(bank.stdout.as_mut().unwrap()).read_line(&mut line).unwrap();
    assert_eq!(line, "created\n");
    bank
}

#[test]
fn bank_and_atm_processes() {
    let dir = tempfile::tempdir().unwrap();
    let port = bibifi_runner::allocate_ports(1).unwrap()[0];
    let mut bank = spawn_bank(dir.path(), "bank", &[], port);
    let p = format!("-p {port}");
    assert_eq!(run(dir.path(), "atm", &format!("{p} -a ann -n 10.00")), (Some(0), "{\"account\":\"ann\",\"initial_balance\":10}\n".into()));
    assert_eq!(run(dir.path(), "atm", &format!("{p} -a ann -w 10.01")), (Some(255), String::new()));
    assert_eq!(run(dir.path(), "atm", &format!("{p} -a ann -g")), (Some(0), "{\"account\":\"ann\",\"balance\":10}\n".into()));
    unsafe_term(&bank);
    assert_eq!(bank.wait().unwrap().code(), Some(0), "bank exits cleanly on SIGTERM");
    let dead = bibifi_runner::allocate_ports(1).unwrap()[0];
    assert_eq!(run(dir.path(), "atm", &format!("-p {dead} -a ann -g")).0, Some(63));
}

fn unsafe_term(child: &std::process::Child) {
    Command::new("kill").args(["-TERM", &child.id().to_string()]).status().unwrap();
}

#[test]
fn atm_fixture_flavors_interoperate_with_themselves() {
    for flavor in ["nonce-free", "plaintext"] {
        let dir = tempfile::tempdir().unwrap();
        let port = bibifi_runner::allocate_ports(1).unwrap()[0];
        let mut bank = spawn_bank(dir.path(), "atm-fixture", &[flavor, "bank"], port);
        let out = Command::new(exe("atm-fixture"))
            .args([flavor, "atm", "-p", &port.to_string(), "-a", "bo", "-n", "1.00"])
            .current_dir(dir.path())
            .output()
            .unwrap();
        assert_eq!(String::from_utf8(out.stdout).unwrap(), "{\"account\":\"bo\",\"initial_balance\":1}\n", "{flavor}");
        bank.kill().unwrap();
        bank.wait().unwrap();
    }
}

fn wait_listen(port: u16) {
    for _ in 0..500 {
        if std::net::TcpStream::connect(("127.0.0.1", port)).is_ok() {
            return;
        }
        std::thread::sleep(Duration::from_millis(10));
    }
    panic!("nothing listening on {port}");
}

#[test]
fn ehr_server_process_and_crash_fixture() {
    let t = Duration::from_secs(10);
    let port = bibifi_runner::allocate_ports(1).unwrap()[0];
    let mut server = Command::new(exe("server")).args([port.to_string(), "pw".into()]).spawn().unwrap();
    // The probe connection counts as one (empty) program.
    wait_listen(port);
    let r = submit(port, &prog("admin", "pw", "return \"x\""), t).unwrap();
    assert_eq!(r, Some(vec!["{\"status\":\"RETURNING\",\"output\":\"x\"}".to_string()]));
    assert_eq!(submit(port, &prog("admin", "admin", "return \"x\""), t).unwrap(), Some(vec!["{\"status\":\"DENIED\"}".to_string()]));
    submit(port, &prog("admin", "pw", "exit"), t).unwrap();
    assert_eq!(server.wait().unwrap().code(), Some(0));

    let port = bibifi_runner::allocate_ports(1).unwrap()[0];
    let mut fixture = Command::new(exe("ehr-fixture")).args(["crash".to_string(), port.to_string()]).spawn().unwrap();
    wait_listen(port);
    assert_eq!(submit(port, &crash_programs()[0], t).unwrap(), None);
    assert_eq!(fixture.wait().unwrap().signal(), Some(6), "crash fixture aborts");

    assert_eq!(Command::new(exe("server")).arg("nope").status().unwrap().code(), Some(255));
}

#[test]
fn fixture_binaries_reject_bad_usage() {
    for (bin, args) in [
        ("securelog-fixture", vec!["bogus", "logread"]),
        ("atm-fixture", vec!["oracle", "teller"]),
        ("ehr-fixture", vec!["bogus", "4000"]),
        ("mitm-fixture", vec!["replay", "1"]),
    ] {
        let out = Command::new(exe(bin)).args(&args).output().unwrap();
        assert_eq!(out.status.code(), Some(255), "{bin}");
    }
}
