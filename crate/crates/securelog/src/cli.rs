use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::codec::{Codec, Loaded, PerRecord, Plaintext, Sealed, TruncatedToken};
use crate::model::{Action, Event, GalleryState, Kind, Person, MAX_NUMBER};
use crate::query::{answer, Query, RoomOrder};

pub const INVALID: &str = "invalid";
pub const INTEGRITY_VIOLATION: &str = "integrity violation";
pub const ERROR_EXIT: i32 = 255;

/// Implementations of the two programs: the oracle and its deliberately
/// flawed variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Oracle,
    /// Stores events and token in clear text.
    Plaintext,
    /// Seals records individually and folds whatever order it finds.
    PerRecord,
    /// Derives its key from two characters of the token.
    TruncatedToken,
    /// Sorts `-S` room lines as strings.
    RoomOrder,
    /// Segfaults on `-S` over an empty gallery.
    Crash,
}

impl Variant {
    pub const ALL: [Variant; 6] =
        [Variant::Oracle, Variant::Plaintext, Variant::PerRecord, Variant::TruncatedToken, Variant::RoomOrder, Variant::Crash];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Oracle => "oracle",
            Variant::Plaintext => "plaintext",
            Variant::PerRecord => "per-record",
            Variant::TruncatedToken => "truncated-token",
            Variant::RoomOrder => "room-order",
            Variant::Crash => "crash",
        }
    }

    fn codec(self) -> &'static dyn Codec {
        match self {
            Variant::Plaintext => &Plaintext,
            Variant::PerRecord => &PerRecord,
            Variant::TruncatedToken => &TruncatedToken,
            Variant::Oracle | Variant::RoomOrder | Variant::Crash => &Sealed,
        }
    }

    fn fold(self, events: &[Event]) -> Option<GalleryState> {
        match self {
            Variant::PerRecord => Some(GalleryState::fold_lenient(events)),
            _ => GalleryState::fold(events).ok(),
        }
    }

    fn room_order(self) -> RoomOrder {
        if self == Variant::RoomOrder {
            RoomOrder::Lexicographic
        } else {
            RoomOrder::Numeric
        }
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL.into_iter().find(|v| v.name() == s).ok_or_else(|| format!("unknown variant {s:?}"))
    }
}

/// What a program invocation printed and how it ended.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Output {
    pub code: i32,
    pub stdout: String,
    /// The process should die with SIGSEGV instead of exiting.
    pub crash: bool,
}

impl Output {
    fn ok(stdout: String) -> Self {
        Output { code: 0, stdout, crash: false }
    }

    fn error(msg: &str) -> Self {
        Output { code: ERROR_EXIT, stdout: format!("{msg}\n"), crash: false }
    }

    /// Writes stdout and terminates the process accordingly.
    pub fn exit(self) -> ! {
        let mut out = std::io::stdout().lock();
        let _ = out.write_all(self.stdout.as_bytes());
        let _ = out.flush();
        if self.crash {
            // SAFETY: raising a signal in our own process.
            unsafe {
                libc::signal(libc::SIGSEGV, libc::SIG_DFL);
                libc::raise(libc::SIGSEGV);
            }
        }
        std::process::exit(self.code)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AppendArgs {
    pub ts: Option<u64>,
    pub token: String,
    pub person: Person,
    pub action: Action,
    pub room: Option<u64>,
    pub log: String,
}

impl AppendArgs {
    /// The argument vector that produces this invocation.
    pub fn to_args(&self) -> Vec<String> {
        let mut a = Vec::new();
        if let Some(ts) = self.ts {
            a.extend(["-T".to_owned(), ts.to_string()]);
        }
        a.extend(["-K".to_owned(), self.token.clone()]);
        a.extend([self.person.kind.flag().to_owned(), self.person.name.clone()]);
        a.push(if self.action == Action::Arrive { "-A" } else { "-L" }.to_owned());
        if let Some(r) = self.room {
            a.extend(["-R".to_owned(), r.to_string()]);
        }
        a.push(self.log.clone());
        a
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReadArgs {
    pub token: String,
    pub query: Query,
    pub log: String,
}

fn valid_token(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphanumeric())
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.len() <= u16::MAX as usize && s.bytes().all(|b| b.is_ascii_alphabetic())
}

fn valid_path(s: &str) -> bool {
    !s.is_empty() && !s.starts_with('-') && s.bytes().all(|b| b.is_ascii_alphanumeric() || b"._/-".contains(&b))
}

fn number(s: &str) -> Option<u64> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok().filter(|&n| n <= MAX_NUMBER)
}

fn set<T>(slot: &mut Option<T>, value: T) -> Option<()> {
    if slot.is_some() {
        return None;
    }
    *slot = Some(value);
    Some(())
}

pub fn parse_append(args: &[String]) -> Option<AppendArgs> {
    let (mut ts, mut token, mut person, mut action, mut room, mut log) = (None, None, None, None, None, None);
    let mut it = args.iter();
    while let Some(a) = it.next() {
        match a.as_str() {
            "-T" => set(&mut ts, number(it.next()?)?)?,
            "-K" => set(&mut token, it.next().filter(|t| valid_token(t))?.clone())?,
            "-E" | "-G" => {
                let kind = if a == "-E" { Kind::Employee } else { Kind::Guest };
                set(&mut person, Person::new(kind, it.next().filter(|n| valid_name(n))?.clone()))?
            }
            "-A" => set(&mut action, Action::Arrive)?,
            "-L" => set(&mut action, Action::Leave)?,
            "-R" => set(&mut room, number(it.next()?)?)?,
            p if valid_path(p) => set(&mut log, p.to_owned())?,
            _ => return None,
        }
    }
    Some(AppendArgs { ts, token: token?, person: person?, action: action?, room, log: log? })
}

pub fn parse_read(args: &[String]) -> Option<ReadArgs> {
    #[derive(PartialEq)]
    enum Mode {
        S,
        R,
        T,
        I,
    }
    let (mut token, mut mode, mut log) = (None, None, None);
    let mut people = Vec::new();
    let mut it = args.iter();
    while let Some(a) = it.next() {
        match a.as_str() {
            "-K" => set(&mut token, it.next().filter(|t| valid_token(t))?.clone())?,
            "-S" => set(&mut mode, Mode::S)?,
            "-R" => set(&mut mode, Mode::R)?,
            "-T" => set(&mut mode, Mode::T)?,
            "-I" => set(&mut mode, Mode::I)?,
            "-E" | "-G" => {
                let kind = if a == "-E" { Kind::Employee } else { Kind::Guest };
                people.push(Person::new(kind, it.next().filter(|n| valid_name(n))?.clone()));
            }
            p if valid_path(p) => set(&mut log, p.to_owned())?,
            _ => return None,
        }
    }
    let query = match mode? {
        Mode::S if people.is_empty() => Query::State,
        Mode::R if people.len() == 1 => Query::History(people.pop()?),
        Mode::T if people.len() == 1 => Query::Time(people.pop()?),
        Mode::I if !people.is_empty() => {
            people.sort();
            people.dedup();
            Query::Intersection(people)
        }
        _ => return None,
    };
    Some(ReadArgs { token: token?, query, log: log? })
}

fn resolve(cwd: &Path, log: &str) -> PathBuf {
    cwd.join(log)
}

/// Replaces `path` via a synced temporary file and rename.
pub fn write_atomically(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    if let Ok(d) = std::fs::File::open(dir) {
        let _ = d.sync_all();
    }
    Ok(())
}

pub fn logappend(args: &[String], cwd: &Path, variant: Variant) -> Output {
    let Some(a) = parse_append(args) else { return Output::error(INVALID) };
    let path = resolve(cwd, &a.log);
    let codec = variant.codec();
    let previous: Option<Loaded> = match std::fs::read(&path) {
        Ok(bytes) => match codec.load(&bytes, &a.token) {
            Ok(l) => Some(l),
            Err(_) => return Output::error(INVALID),
        },
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(_) => return Output::error(INVALID),
    };
    let mut events = previous.as_ref().map(|l| l.events.clone()).unwrap_or_default();
    let Some(state) = variant.fold(&events) else { return Output::error(INVALID) };
    let event = Event { ts: a.ts.unwrap_or_else(|| state.next_ts()), person: a.person, action: a.action, room: a.room };
    if event.ts > MAX_NUMBER || state.check(&event).is_err() {
        return Output::error(INVALID);
    }
    events.push(event);
    let bytes = codec.store(&events, &a.token, previous.as_ref());
    match write_atomically(&path, &bytes) {
        Ok(()) => Output::ok(String::new()),
        Err(_) => Output::error(INVALID),
    }
}

pub fn logread(args: &[String], cwd: &Path, variant: Variant) -> Output {
    let Some(a) = parse_read(args) else { return Output::error(INVALID) };
    let Ok(bytes) = std::fs::read(resolve(cwd, &a.log)) else { return Output::error(INVALID) };
    let Ok(loaded) = variant.codec().load(&bytes, &a.token) else { return Output::error(INTEGRITY_VIOLATION) };
    let Some(state) = variant.fold(&loaded.events) else { return Output::error(INTEGRITY_VIOLATION) };
    if variant == Variant::Crash && a.query == Query::State && state.location.is_empty() {
        return Output { code: 0, stdout: String::new(), crash: true };
    }
    Output::ok(answer(&state, &a.query, variant.room_order()))
}

/// Entry point shared by the oracle and fixture binaries.
pub fn main_for(program: &str, variant: Variant) -> ! {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cwd = std::env::current_dir().unwrap_or_else(|_| PathBuf::from("."));
    let out = match program {
        "logappend" => logappend(&args, &cwd, variant),
        "logread" => logread(&args, &cwd, variant),
        _ => Output::error(INVALID),
    };
    out.exit()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn append_parsing() {
        let a = parse_append(&args("-K secret -A -G Fred -R 1 logfile")).unwrap();
        assert_eq!(a.person, Person::new(Kind::Guest, "Fred"));
        assert_eq!((a.ts, a.room, a.action), (None, Some(1), Action::Arrive));
        assert_eq!(parse_append(&a.to_args()), Some(a));
        for bad in [
            "-K secret -A -G Fred",
            "-K secret -A -L -G Fred log",
            "-K secret -A -G Fred -E Bob log",
            "-K sec-ret -A -G Fred log",
            "-K secret -A -G Fr3d log",
            "-K secret -A -G Fred -R -1 log",
            "-K secret -A -G Fred -R 1073741824 log",
            "-T 1 -T 2 -K secret -A -G Fred log",
            "-K secret -A -G Fred log log2",
            "-K secret -A -G Fred -X log",
        ] {
            assert_eq!(parse_append(&args(bad)), None, "{bad}");
        }
    }

    #[test]
    fn read_parsing() {
        assert_eq!(parse_read(&args("-K s -S log")).unwrap().query, Query::State);
        assert!(matches!(parse_read(&args("-K s -R -E Bob log")).unwrap().query, Query::History(_)));
        assert!(matches!(parse_read(&args("-K s -I -E Bob -G Al log")).unwrap().query, Query::Intersection(p) if p.len() == 2));
        for bad in ["-K s log", "-K s -S -R -E Bob log", "-K s -R log", "-K s -R -E A -E B log", "-K s -S -E Bob log", "-S log"] {
            assert_eq!(parse_read(&args(bad)), None, "{bad}");
        }
    }

    #[test]
    fn errors_leave_the_file_alone() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(logappend(&args("-K k -A -G a log"), dir.path(), Variant::Oracle).code, 0);
        let before = std::fs::read(dir.path().join("log")).unwrap();
        for bad in ["-K k -L -G b log", "-K wrong -A -G b log", "-T 1 -K k -A -G b log", "-K k -A -G a log"] {
            let out = logappend(&args(bad), dir.path(), Variant::Oracle);
            assert_eq!((out.code, out.stdout.as_str()), (255, "invalid\n"), "{bad}");
            assert_eq!(std::fs::read(dir.path().join("log")).unwrap(), before);
        }
        let out = logread(&args("-K wrong -S log"), dir.path(), Variant::Oracle);
        assert_eq!(out.stdout, "integrity violation\n");
    }
}
