//! Process entry points for the oracles and the flawed fixtures, and a helper
//! that lays a binary out as a named build artifact.
//!
//! Oracle binaries: `logappend`, `logread`, `bank`, `atm`, `server`.
//! Fixture binaries take the variant first:
//! `securelog-fixture <variant> <logappend|logread> ...`,
//! `atm-fixture <flavor> <bank|atm> ...`, `ehr-fixture <variant> <port> [pw]`,
//! `mitm-fixture <strategy> <listen> <bank> <command>`.

use std::io::Write;
use std::net::TcpListener;
use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;

use bibifi_atm::mitm::Strategy;
use bibifi_atm::{Flavor, MitmPorts};
use bibifi_ehr::server::{self, ServeEnd};
use bibifi_ehr::{Interpreter, Variant as EhrVariant};
use bibifi_securelog::cli::INVALID;
use bibifi_securelog::Variant as LogVariant;

const FAIL: i32 = 255;

fn cwd() -> PathBuf {
    std::env::current_dir().unwrap_or_else(|_| PathBuf::from("."))
}

pub fn args() -> Vec<String> {
    std::env::args().skip(1).collect()
}

pub fn log_variant(name: &str) -> Option<LogVariant> {
    LogVariant::ALL.into_iter().find(|v| v.name() == name)
}

/// `logappend` or `logread` as `variant`; never returns.
pub fn securelog_main(program: &str, variant: LogVariant, args: &[String]) -> ! {
    let out = match program {
        "logappend" => bibifi_securelog::logappend(args, &cwd(), variant),
        "logread" => bibifi_securelog::logread(args, &cwd(), variant),
        _ => {
            println!("{INVALID}");
            std::process::exit(FAIL)
        }
    };
    out.exit()
}

pub fn bank_main(flavor: Flavor, args: &[String]) -> i32 {
    let stop = bibifi_atm::cli::termination_flag();
    let mut out = std::io::stdout();
    bibifi_atm::cli::bank(args, &cwd(), flavor, stop, &mut out)
}

pub fn atm_main(flavor: Flavor, args: &[String]) -> i32 {
    let out = bibifi_atm::cli::atm(args, &cwd(), flavor, bibifi_atm::bank::IO_TIMEOUT);
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(out.stdout.as_bytes());
    let _ = stdout.flush();
    out.code
}

/// `server <port> [admin-password]`. A fixture crash aborts the process so
/// the judge sees a signal.
pub fn server_main(variant: EhrVariant, args: &[String]) -> i32 {
    let (port, password) = match server::parse_args(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("{e}");
            return FAIL;
        }
    };
    let Ok(listener) = TcpListener::bind(("127.0.0.1", port)) else {
        eprintln!("cannot listen on {port}");
        return FAIL;
    };
    let mut interp = Interpreter::new(variant, &password);
    match server::serve(listener, &mut interp, &AtomicBool::new(false)) {
        Ok(ServeEnd::Crashed) => std::process::abort(),
        Ok(_) => 0,
        Err(e) => {
            eprintln!("{e}");
            FAIL
        }
    }
}

/// `<strategy> <listen> <bank> <command>`.
pub fn mitm_main(args: &[String]) -> i32 {
    let parsed = match args {
        [s, listen, bank, command] => {
            Strategy::parse(s).zip(listen.parse().ok()).zip(bank.parse().ok()).zip(command.parse().ok())
        }
        _ => None,
    };
    let Some((((strategy, listen), bank), command)) = parsed else {
        eprintln!("usage: mitm-fixture <strategy> <listen> <bank> <command>");
        return FAIL;
    };
    let ports = MitmPorts { listen, bank, command, oracle_bank: 0 };
    match bibifi_atm::mitm::run(strategy, &ports) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            1
        }
    }
}

/// Writes `dir/name`, a shell wrapper running `exe prefix... "$@"`. This is
/// how a fixture binary stands in for a team's build artifact.
pub fn install(dir: &Path, name: &str, exe: &Path, prefix: &[&str]) -> std::io::Result<PathBuf> {
    let quote = |s: &str| format!("'{}'", s.replace('\'', r"'\''"));
    let mut line = quote(&exe.to_string_lossy());
    for p in prefix {
        line.push(' ');
        line.push_str(&quote(p));
    }
    let path = dir.join(name);
    std::fs::write(&path, format!("#!/bin/sh\nexec {line} \"$@\"\n"))?;
    std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755))?;
    Ok(path)
}
