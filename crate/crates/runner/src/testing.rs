use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::net::{Shutdown, TcpStream};
use std::time::{Duration, Instant};

use bibifi_scoring::Points;
use serde::{Deserialize, Serialize};

use crate::artifacts::Artifacts;
use crate::ports::allocate_ports;
use crate::problem::{Measure, Ready, Step, TestDescriptor};
use crate::sandbox::{is_crash_signal, mentions_denial, Background, IsolationProvider, Limits, RunRequest, Verdict};
use crate::RunnerError;

const READY_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub test_id: String,
    pub passed: bool,
    pub measure: Option<Points>,
    pub transcript: String,
    /// Set when the failure looks like the sandbox refusing an access rather
    /// than a wrong answer.
    #[serde(default)]
    pub fault: Option<String>,
    /// Program and signal of the first process that died abnormally.
    #[serde(default)]
    pub crash: Option<String>,
}

/// Output comparison ignores trailing newlines and is otherwise byte-exact.
pub fn normalize(s: &str) -> &str {
    s.trim_end_matches('\n')
}

pub fn outputs_match(expected: &str, actual: &str) -> bool {
    normalize(expected) == normalize(actual)
}

/// Replaces `{port:NAME}` placeholders.
pub fn substitute_ports(text: &str, ports: &BTreeMap<String, u16>) -> String {
    let mut out = text.to_owned();
    for (name, port) in ports {
        out = out.replace(&format!("{{port:{name}}}"), &port.to_string());
    }
    out
}

/// Runs a test against built artifacts. Repeated tests report the median measure.
pub fn run_test<P: IsolationProvider + ?Sized>(
    artifacts: &Artifacts,
    test: &TestDescriptor,
    provider: &P,
    loopback: bool,
) -> Result<TestOutcome, RunnerError> {
    let names = test.port_names();
    let ports: BTreeMap<String, u16> = names.into_iter().zip(allocate_ports(test.port_names().len())?).collect();
    run_test_with_ports(artifacts, test, provider, loopback, &ports)
}

pub fn run_test_with_ports<P: IsolationProvider + ?Sized>(
    artifacts: &Artifacts,
    test: &TestDescriptor,
    provider: &P,
    loopback: bool,
    ports: &BTreeMap<String, u16>,
) -> Result<TestOutcome, RunnerError> {
    let mut ports = ports.clone();
    let missing: Vec<String> = test.port_names().into_iter().filter(|n| !ports.contains_key(n)).collect();
    ports.extend(missing.iter().cloned().zip(allocate_ports(missing.len())?));

    let mut passed = true;
    let mut transcript = String::new();
    let mut fault = None;
    let mut crash = None;
    let mut measures = Vec::new();
    for rep in 0..test.repetitions.max(1) {
        let run = run_script(artifacts, test, provider, loopback, &ports)?;
        if rep == 0 || !run.passed {
            transcript = run.transcript;
            fault = run.fault;
        }
        crash = crash.or(run.crash);
        passed &= run.passed;
        if !run.passed {
            break;
        }
        if let Some(m) = run.measure {
            measures.push(m);
        }
    }
    measures.sort();
    let measure = if passed && !measures.is_empty() { Some(measures[measures.len() / 2]) } else { None };
    Ok(TestOutcome { test_id: test.id.clone(), passed, measure, transcript, fault, crash })
}

struct ScriptRun {
    passed: bool,
    transcript: String,
    measure: Option<Points>,
    fault: Option<String>,
    crash: Option<String>,
}

fn run_script<P: IsolationProvider + ?Sized>(
    artifacts: &Artifacts,
    test: &TestDescriptor,
    provider: &P,
    loopback: bool,
    ports: &BTreeMap<String, u16>,
) -> Result<ScriptRun, RunnerError> {
    let sandbox = provider.provision()?;
    let mut limits = Limits::test().with_wall(test.timeout);
    if loopback {
        limits = limits.with_ports(&ports.values().copied().collect::<Vec<_>>());
    }
    let started = Instant::now();
    let deadline = started + test.timeout;
    let mut background: HashMap<String, Background> = HashMap::new();
    let mut transcript = String::new();
    let mut stdout_bytes = 0usize;
    let mut passed = true;
    let mut fault = None;
    let mut crash: Option<String> = None;

    let result = (|| -> Result<(), RunnerError> {
        for step in &test.script {
            if Instant::now() > deadline {
                let _ = writeln!(transcript, "!! test exceeded {:?}", test.timeout);
                passed = false;
                return Ok(());
            }
            match step {
                Step::Run { program, args, stdin, expect_exit, expect_stdout } => {
                    let args: Vec<String> = args.iter().map(|a| substitute_ports(a, ports)).collect();
                    let _ = writeln!(transcript, "$ {program} {}", args.join(" "));
                    let mut req = RunRequest::new(artifacts.path(program)?).args(&args).limits(limits.clone());
                    if let Some(input) = stdin {
                        req = req.stdin(substitute_ports(input, ports));
                    }
                    let res = provider.execute(&sandbox, &req)?;
                    if let Some(sig) = res.signal.filter(|s| is_crash_signal(*s)) {
                        crash.get_or_insert_with(|| format!("{program} signal {sig}"));
                    }
                    let out = res.stdout_str();
                    stdout_bytes += res.stdout.len();
                    let _ = writeln!(transcript, "[{:?} exit={:?} signal={:?}]", res.verdict, res.exit_code, res.signal);
                    transcript.push_str(&out);
                    let failed = res.verdict != Verdict::Ok
                        || expect_exit.is_some_and(|c| res.exit_code != Some(c))
                        || expect_stdout.as_ref().is_some_and(|e| !outputs_match(e, &out));
                    if failed && provider.enforced() && mentions_denial(&res.stderr) {
                        fault = Some(format!("{program}: {}", String::from_utf8_lossy(&res.stderr).trim_end()));
                    }
                    if res.verdict != Verdict::Ok {
                        passed = false;
                        return Ok(());
                    }
                    if let Some(code) = expect_exit {
                        if res.exit_code != Some(*code) {
                            let _ = writeln!(transcript, "!! expected exit {code}");
                            passed = false;
                            return Ok(());
                        }
                    }
                    if let Some(expected) = expect_stdout {
                        if !outputs_match(expected, &out) {
                            let _ = writeln!(transcript, "!! expected stdout:\n{expected}");
                            passed = false;
                            return Ok(());
                        }
                    }
                }
                Step::Start { name, program, args, ready } => {
                    let args: Vec<String> = args.iter().map(|a| substitute_ports(a, ports)).collect();
                    let _ = writeln!(transcript, "$ {program} {} &", args.join(" "));
                    let mut bg_limits = limits.clone();
                    bg_limits.wall = Duration::from_secs(3600);
                    let req = RunRequest::new(artifacts.path(program)?).args(&args).limits(bg_limits);
                    let mut bg = provider.spawn(&sandbox, &req)?;
                    let ok = match ready {
                        Ready::Immediately => true,
                        Ready::Line(line) => bg.wait_for_line(READY_TIMEOUT, |l| l == line),
                        Ready::Listen(port) => bg.wait_for_listen(ports[port], READY_TIMEOUT),
                    };
                    background.insert(name.clone(), bg);
                    if !ok {
                        let _ = writeln!(transcript, "!! {name} never became ready");
                        passed = false;
                        return Ok(());
                    }
                }
                Step::Send { port, input, expect } => {
                    let input = substitute_ports(input, ports);
                    let _ = writeln!(transcript, "> {}", input.trim_end());
                    let left = deadline.saturating_duration_since(Instant::now()).max(Duration::from_millis(10));
                    match exchange(ports[port], &input, left) {
                        Ok(reply) => {
                            stdout_bytes += reply.len();
                            transcript.push_str(&reply);
                            if let Some(expected) = expect {
                                if !outputs_match(expected, &reply) {
                                    let _ = writeln!(transcript, "!! expected reply:\n{expected}");
                                    passed = false;
                                    return Ok(());
                                }
                            }
                        }
                        Err(e) => {
                            let _ = writeln!(transcript, "!! connection failed: {e}");
                            passed = false;
                            return Ok(());
                        }
                    }
                }
                Step::Stop { name } => {
                    if let Some(bg) = background.remove(name) {
                        let res = bg.stop();
                        if let Some(sig) = res.signal.filter(|s| is_crash_signal(*s)) {
                            crash.get_or_insert_with(|| format!("{name} signal {sig}"));
                        }
                        if res.verdict == Verdict::Crashed {
                            let _ = writeln!(transcript, "!! {name} crashed (signal {:?})", res.signal);
                            passed = false;
                            return Ok(());
                        }
                    }
                }
            }
        }
        Ok(())
    })();

    let elapsed = started.elapsed();
    for (name, bg) in background.drain() {
        if let Some(sig) = bg.stop().signal.filter(|s| is_crash_signal(*s)) {
            crash.get_or_insert_with(|| format!("{name} signal {sig}"));
        }
    }
    let measure = match &test.measure {
        Measure::None => None,
        Measure::WallTime => Some(Points::new(elapsed.as_micros() as i64, 1000)),
        Measure::OutputBytes { file: None } => Some(Points::from_integer(stdout_bytes as i64)),
        Measure::OutputBytes { file: Some(f) } => {
            let len = std::fs::metadata(sandbox.path().join(f)).map(|m| m.len()).unwrap_or(0);
            Some(Points::from_integer(len as i64))
        }
    };
    provider.destroy(sandbox);
    result?;
    Ok(ScriptRun { passed, transcript, measure, fault, crash })
}

/// Sends one request over a fresh TCP connection and reads until the peer closes.
pub fn exchange(port: u16, input: &str, timeout: Duration) -> std::io::Result<String> {
    let deadline = Instant::now() + timeout;
    let mut stream = loop {
        match TcpStream::connect(("127.0.0.1", port)) {
            Ok(s) => break s,
            Err(e) if Instant::now() + Duration::from_millis(20) < deadline => {
                let _ = e;
                std::thread::sleep(Duration::from_millis(20));
            }
            Err(e) => return Err(e),
        }
    };
    stream.set_read_timeout(Some(deadline.saturating_duration_since(Instant::now()).max(Duration::from_millis(1))))?;
    stream.write_all(input.as_bytes())?;
    let _ = stream.shutdown(Shutdown::Write);
    let mut reply = Vec::new();
    stream.read_to_end(&mut reply)?;
    Ok(String::from_utf8_lossy(&reply).into_owned())
}
