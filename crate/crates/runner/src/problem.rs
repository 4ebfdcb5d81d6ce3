use std::collections::{BTreeSet, HashSet};
use std::time::Duration;

use bibifi_scoring::{BugCategory, Problem, SubmissionLimits};
use serde::{Deserialize, Serialize};

use crate::RunnerError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestClass {
    Mandatory,
    Optional,
    Performance,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Measure {
    None,
    /// Elapsed time of the whole script, in milliseconds.
    WallTime,
    /// Size of a file left in the sandbox, or of all captured stdout when `file` is unset.
    OutputBytes { file: Option<String> },
}

/// How to tell that a background process is ready for traffic.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum Ready {
    Immediately,
    /// A stdout line equal to this text.
    Line(String),
    /// A listener on this named port.
    Listen(String),
}

/// One scripted action. Strings may contain `{port:NAME}` placeholders,
/// which the harness replaces with allocated loopback ports.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum Step {
    Run {
        program: String,
        #[serde(default)]
        args: Vec<String>,
        #[serde(default)]
        stdin: Option<String>,
        #[serde(default)]
        expect_exit: Option<i32>,
        #[serde(default)]
        expect_stdout: Option<String>,
    },
    Start {
        name: String,
        program: String,
        #[serde(default)]
        args: Vec<String>,
        ready: Ready,
    },
    Send {
        port: String,
        input: String,
        #[serde(default)]
        expect: Option<String>,
    },
    Stop {
        name: String,
    },
}

impl Step {
    pub fn run(program: &str, args: &[&str]) -> Step {
        Step::Run {
            program: program.into(),
            args: args.iter().map(|s| s.to_string()).collect(),
            stdin: None,
            expect_exit: None,
            expect_stdout: None,
        }
    }

    pub fn expect(mut self, exit: i32, stdout: &str) -> Step {
        if let Step::Run { expect_exit, expect_stdout, .. } = &mut self {
            *expect_exit = Some(exit);
            *expect_stdout = Some(stdout.into());
        }
        self
    }

    pub fn expect_exit(mut self, exit: i32) -> Step {
        if let Step::Run { expect_exit, .. } = &mut self {
            *expect_exit = Some(exit);
        }
        self
    }

    fn port_names(&self) -> Vec<String> {
        match self {
            Step::Run { args, stdin, .. } => placeholders(args.iter().map(String::as_str).chain(stdin.as_deref())),
            Step::Start { args, ready, .. } => {
                let mut names = placeholders(args.iter().map(String::as_str));
                if let Ready::Listen(p) = ready {
                    names.push(p.clone());
                }
                names
            }
            Step::Send { port, input, .. } => {
                let mut names = placeholders([input.as_str()]);
                names.push(port.clone());
                names
            }
            Step::Stop { .. } => vec![],
        }
    }
}

fn placeholders<'a>(texts: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    let mut out = Vec::new();
    for t in texts {
        let mut rest = t;
        while let Some(i) = rest.find("{port:") {
            let after = &rest[i + 6..];
            match after.find('}') {
                Some(j) => {
                    out.push(after[..j].to_owned());
                    rest = &after[j + 1..];
                }
                None => break,
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestDescriptor {
    pub id: String,
    pub class: TestClass,
    pub script: Vec<Step>,
    pub timeout: Duration,
    pub measure: Measure,
    /// Runs per measurement; the median is reported.
    #[serde(default = "one")]
    pub repetitions: u32,
}

fn one() -> u32 {
    1
}

impl TestDescriptor {
    pub fn correctness(id: &str, class: TestClass, script: Vec<Step>) -> Self {
        TestDescriptor {
            id: id.into(),
            class,
            script,
            timeout: crate::Limits::TEST_WALL,
            measure: Measure::None,
            repetitions: 1,
        }
    }

    pub fn performance(id: &str, measure: Measure, script: Vec<Step>) -> Self {
        TestDescriptor {
            id: id.into(),
            class: TestClass::Performance,
            script,
            timeout: crate::Limits::TEST_WALL,
            measure,
            repetitions: 3,
        }
    }

    /// Named ports the script refers to, in first-use order.
    pub fn port_names(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.script.iter().flat_map(Step::port_names).filter(|p| seen.insert(p.clone())).collect()
    }
}

/// Everything the runner needs to know about one contest problem.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemDescriptor {
    pub problem: Problem,
    /// Executables a build must produce, relative to the bundle root.
    pub artifacts: Vec<String>,
    pub tests: Vec<TestDescriptor>,
    pub break_categories: BTreeSet<BugCategory>,
    pub limits: SubmissionLimits,
    /// Whether contestant processes may use loopback TCP.
    pub loopback: bool,
}

impl ProblemDescriptor {
    pub fn validate(&self) -> Result<(), RunnerError> {
        let mut ids = HashSet::new();
        for t in &self.tests {
            if !ids.insert(t.id.as_str()) {
                return Err(RunnerError::Descriptor(format!("duplicate test id {:?}", t.id)));
            }
            if t.timeout.is_zero() {
                return Err(RunnerError::Descriptor(format!("test {:?} has zero timeout", t.id)));
            }
            if t.class == TestClass::Performance && t.measure == Measure::None {
                return Err(RunnerError::Descriptor(format!("performance test {:?} declares no measure", t.id)));
            }
            if t.repetitions == 0 {
                return Err(RunnerError::Descriptor(format!("test {:?} has zero repetitions", t.id)));
            }
        }
        if !self.tests.iter().any(|t| t.class == TestClass::Mandatory) {
            return Err(RunnerError::Descriptor("no mandatory test".into()));
        }
        Ok(())
    }

    pub fn test(&self, id: &str) -> Option<&TestDescriptor> {
        self.tests.iter().find(|t| t.id == id)
    }

    pub fn mandatory(&self) -> impl Iterator<Item = &TestDescriptor> {
        self.tests.iter().filter(|t| t.class == TestClass::Mandatory)
    }
}
