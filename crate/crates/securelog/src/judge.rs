use std::path::{Path, PathBuf};

use bibifi_runner::{is_crash_signal, outputs_match, Judgement, RunnerError, Session, Verdict};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cli::{self, AppendArgs, Variant, INTEGRITY_VIOLATION, INVALID};
use crate::gen::{self, SequenceSpec};
use crate::model::GalleryState;
use crate::query::{answer, RoomOrder};

/// File name challenge logs are placed under inside a target's directory.
pub const CHALLENGE_LOG: &str = "challenge.log";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Program {
    LogAppend,
    LogRead,
}

impl Program {
    pub fn artifact(self) -> &'static str {
        match self {
            Program::LogAppend => "logappend",
            Program::LogRead => "logread",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Invocation {
    pub exit_code: Option<i32>,
    pub signal: Option<i32>,
    pub stdout: String,
    pub timed_out: bool,
}

impl Invocation {
    pub fn crashed(&self) -> bool {
        self.signal.is_some_and(is_crash_signal)
    }

    pub fn succeeded(&self) -> bool {
        self.exit_code == Some(0) && !self.timed_out
    }

    pub fn describe(&self) -> String {
        format!("exit={:?} signal={:?} timed_out={} stdout={:?}", self.exit_code, self.signal, self.timed_out, self.stdout)
    }
}

/// Something that can run `logappend` and `logread` in a persistent directory.
pub trait LogTarget {
    fn dir(&self) -> &Path;
    fn invoke(&self, program: Program, args: &[String]) -> Result<Invocation, RunnerError>;
}

impl LogTarget for Session {
    fn dir(&self) -> &Path {
        Session::dir(self)
    }

    fn invoke(&self, program: Program, args: &[String]) -> Result<Invocation, RunnerError> {
        let r = self.run(program.artifact(), args)?;
        Ok(Invocation {
            exit_code: r.exit_code,
            signal: r.signal,
            stdout: r.stdout_str(),
            timed_out: r.verdict == Verdict::Timeout,
        })
    }
}

/// Runs a variant in this process, for fast differential testing.
pub struct InProcess {
    variant: Variant,
    dir: tempfile::TempDir,
}

impl InProcess {
    pub fn new(variant: Variant) -> std::io::Result<Self> {
        Ok(InProcess { variant, dir: tempfile::tempdir()? })
    }
}

impl LogTarget for InProcess {
    fn dir(&self) -> &Path {
        self.dir.path()
    }

    fn invoke(&self, program: Program, args: &[String]) -> Result<Invocation, RunnerError> {
        let out = match program {
            Program::LogAppend => cli::logappend(args, self.dir.path(), self.variant),
            Program::LogRead => cli::logread(args, self.dir.path(), self.variant),
        };
        Ok(Invocation {
            exit_code: (!out.crash).then_some(out.code),
            signal: out.crash.then_some(libc::SIGSEGV),
            stdout: out.stdout,
            timed_out: false,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Challenge {
    pub log_name: String,
    #[serde(with = "hex_bytes")]
    pub log: Vec<u8>,
    /// Withheld from breakers.
    pub token: String,
    /// Full logappend argument vectors, token included.
    pub transcript: Vec<Vec<String>>,
    /// Integrity challenges reveal the transcript; privacy challenges do not.
    pub transcript_revealed: bool,
}

impl Challenge {
    /// The transcript as breakers see it, with the token masked.
    pub fn public_transcript(&self) -> Option<Vec<Vec<String>>> {
        self.transcript_revealed.then(|| {
            self.transcript
                .iter()
                .map(|argv| argv.iter().map(|a| if *a == self.token { "<token>".to_owned() } else { a.clone() }).collect())
                .collect()
        })
    }

    pub fn parsed_transcript(&self) -> Option<Vec<AppendArgs>> {
        self.transcript.iter().map(|a| cli::parse_append(a)).collect()
    }
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        hex::decode(String::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum JudgeError {
    #[error(transparent)]
    Runner(#[from] RunnerError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("target failed while generating challenge {index}: {detail}")]
    Generation { index: usize, detail: String },
    #[error("malformed query or transcript: {0}")]
    Malformed(String),
}

/// Generates `count` challenge logs with the target's own logappend.
/// Deterministic in `seed` (the sealed bytes differ run to run because of
/// fresh nonces; commands and tokens do not).
pub fn generate_challenge_logs(target: &dyn LogTarget, seed: u64, count: usize) -> Result<Vec<Challenge>, JudgeError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for index in 0..count {
        let token = gen::token(&mut rng);
        let log_name = format!("log{index}");
        let spec = SequenceSpec::challenge(&mut rng);
        let transcript: Vec<Vec<String>> =
            gen::valid_sequence(&mut rng, &spec, &token, &log_name).iter().map(AppendArgs::to_args).collect();
        for argv in &transcript {
            let inv = target.invoke(Program::LogAppend, argv)?;
            if !inv.succeeded() {
                return Err(JudgeError::Generation { index, detail: inv.describe() });
            }
        }
        let log = std::fs::read(target.dir().join(&log_name))?;
        out.push(Challenge { log_name, log, token, transcript, transcript_revealed: index % 2 == 0 });
    }
    Ok(out)
}

fn query_argv(token: &str, query: &[String]) -> Result<Vec<String>, JudgeError> {
    if query.iter().any(|a| a == "-K") {
        return Err(JudgeError::Malformed("queries must omit -K".into()));
    }
    let mut argv = vec!["-K".to_owned(), token.to_owned()];
    argv.extend(query.iter().cloned());
    argv.push(CHALLENGE_LOG.to_owned());
    Ok(argv)
}

fn place_log(target: &dyn LogTarget, bytes: &[u8]) -> Result<PathBuf, JudgeError> {
    let path = target.dir().join(CHALLENGE_LOG);
    std::fs::write(&path, bytes)?;
    Ok(path)
}

fn is_error_answer(inv: &Invocation) -> bool {
    let out = inv.stdout.trim_end_matches('\n');
    !inv.succeeded() || out == INVALID || out == INTEGRITY_VIOLATION
}

/// Runs the target's logread over `log` with the true token; confirmed iff
/// it answers successfully with exactly the breaker's claimed output.
pub fn judge_privacy(
    target: &dyn LogTarget,
    log: &[u8],
    token: &str,
    claimed: &str,
    query: &[String],
) -> Result<Judgement, JudgeError> {
    let argv = query_argv(token, query)?;
    place_log(target, log)?;
    let inv = target.invoke(Program::LogRead, &argv)?;
    if inv.crashed() {
        return Ok(Judgement::crash(format!("logread {} on its own log: {}", query.join(" "), inv.describe())));
    }
    if is_error_answer(&inv) {
        return Ok(Judgement::rejected(format!("target answered with an error: {}", inv.describe())));
    }
    if claimed.trim_end_matches('\n').is_empty() {
        return Ok(Judgement::rejected("empty claim reveals nothing"));
    }
    if outputs_match(claimed, &inv.stdout) {
        Ok(Judgement::confirmed(format!("claimed output matches logread {}", query.join(" "))))
    } else {
        Ok(Judgement::rejected("claimed output differs from the true answer"))
    }
}

/// The answer the oracle gives for `query` over the log `transcript` builds.
pub fn oracle_answer(transcript: &[AppendArgs], query: &[String]) -> Result<String, JudgeError> {
    let mut argv = vec!["-K".to_owned(), "x".to_owned()];
    argv.extend(query.iter().cloned());
    argv.push("log".to_owned());
    let parsed = cli::parse_read(&argv).ok_or_else(|| JudgeError::Malformed(format!("query {query:?}")))?;
    let state = GalleryState::fold(&gen::events_of(transcript)).expect("events_of keeps only valid events");
    Ok(answer(&state, &parsed.query, RoomOrder::Numeric))
}

/// Runs the target's logread over the corrupted log. Confirmed iff it gives
/// a non-error answer that differs both from the oracle's answer for the
/// transcript and from the target's own answer on the genuine log.
pub fn judge_integrity(
    target: &dyn LogTarget,
    log: &[u8],
    corrupted: &[u8],
    token: &str,
    query: &[String],
    transcript: &[AppendArgs],
) -> Result<Judgement, JudgeError> {
    if log == corrupted {
        return Ok(Judgement::rejected("corrupted log is identical to the original"));
    }
    let argv = query_argv(token, query)?;
    let correct = oracle_answer(transcript, query)?;

    place_log(target, log)?;
    let genuine = target.invoke(Program::LogRead, &argv)?;

    place_log(target, corrupted)?;
    let inv = target.invoke(Program::LogRead, &argv)?;
    if inv.crashed() {
        return Ok(Judgement::crash(format!("logread on corrupted log: {}", inv.describe())));
    }
    if is_error_answer(&inv) {
        return Ok(Judgement::rejected("target detected the corruption"));
    }
    if outputs_match(&correct, &inv.stdout) {
        return Ok(Judgement::rejected("answer on the corrupted log is the correct answer"));
    }
    if !is_error_answer(&genuine) && outputs_match(&genuine.stdout, &inv.stdout) {
        return Ok(Judgement::rejected("answer unchanged from the genuine log"));
    }
    Ok(Judgement::confirmed(format!("expected {:?}, target answered {:?}", correct, inv.stdout)))
}
