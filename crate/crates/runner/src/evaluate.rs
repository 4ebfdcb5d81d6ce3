use std::path::Path;
use std::sync::mpsc;

use bibifi_scoring::{CorrectnessOutcome, PerformanceOutcome, ShipEvidence, TeamId, TestKind};
use serde::{Deserialize, Serialize};

use crate::artifacts::Artifacts;
use crate::build::run_build;
use crate::problem::{Measure, ProblemDescriptor, TestClass};
use crate::sandbox::IsolationProvider;
use crate::testing::{run_test, TestOutcome};
use crate::RunnerError;

/// Upper bound on tests running at once.
pub const DEFAULT_PARALLELISM: usize = 4;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Evaluation {
    pub qualified: bool,
    /// In descriptor order.
    pub outcomes: Vec<TestOutcome>,
    pub build_log: String,
}

impl Evaluation {
    pub fn outcome(&self, test_id: &str) -> Option<&TestOutcome> {
        self.outcomes.iter().find(|o| o.test_id == test_id)
    }

    pub fn ship_evidence(&self, team: TeamId, problem: &ProblemDescriptor) -> ShipEvidence {
        let mut correctness = Vec::new();
        let mut performance = Vec::new();
        for (test, outcome) in problem.tests.iter().zip(&self.outcomes) {
            match test.class {
                TestClass::Mandatory | TestClass::Optional => correctness.push(CorrectnessOutcome {
                    test_id: test.id.clone(),
                    kind: if test.class == TestClass::Mandatory { TestKind::Mandatory } else { TestKind::Optional },
                    passed: outcome.passed,
                }),
                TestClass::Performance => {
                    if let (true, Some(m)) = (outcome.passed, outcome.measure) {
                        performance.push(PerformanceOutcome { test_id: test.id.clone(), measure: m, unit: unit(&test.measure) });
                    }
                }
            }
        }
        ShipEvidence { team, qualified: self.qualified, correctness, performance }
    }
}

fn unit(measure: &Measure) -> String {
    match measure {
        Measure::None => "",
        Measure::WallTime => "ms",
        Measure::OutputBytes { .. } => "bytes",
    }
    .to_owned()
}

/// Builds the bundle, then runs every test. Qualified iff the build succeeds
/// and every mandatory test passes.
pub fn evaluate_submission<P: IsolationProvider + ?Sized>(
    bundle: &Path,
    problem: &ProblemDescriptor,
    provider: &P,
) -> Result<Evaluation, RunnerError> {
    problem.validate()?;
    let build = run_build(bundle, &problem.artifacts, provider)?;
    let artifacts = build.outcome.map_err(|failure| RunnerError::BuildFailed { failure, log: build.log.clone() })?;
    let mut evaluation = evaluate_artifacts(&artifacts, problem, provider, DEFAULT_PARALLELISM)?;
    evaluation.build_log = build.log;
    Ok(evaluation)
}

/// Runs all tests of `problem` against already built artifacts.
pub fn evaluate_artifacts<P: IsolationProvider + ?Sized>(
    artifacts: &Artifacts,
    problem: &ProblemDescriptor,
    provider: &P,
    parallelism: usize,
) -> Result<Evaluation, RunnerError> {
    let tests = &problem.tests;
    let (work_tx, work_rx) = mpsc::channel::<usize>();
    let work_rx = std::sync::Mutex::new(work_rx);
    let (done_tx, done_rx) = mpsc::channel::<(usize, Result<TestOutcome, RunnerError>)>();
    for i in 0..tests.len() {
        work_tx.send(i).expect("receiver alive");
    }
    drop(work_tx);

    std::thread::scope(|scope| {
        for _ in 0..parallelism.clamp(1, tests.len().max(1)) {
            let done_tx = done_tx.clone();
            let work_rx = &work_rx;
            scope.spawn(move || loop {
                let next = work_rx.lock().unwrap().recv();
                let Ok(i) = next else { break };
                let outcome = run_test(artifacts, &tests[i], provider, problem.loopback);
                if done_tx.send((i, outcome)).is_err() {
                    break;
                }
            });
        }
    });
    drop(done_tx);

    let mut slots: Vec<Option<TestOutcome>> = vec![None; tests.len()];
    for (i, outcome) in done_rx {
        slots[i] = Some(outcome?);
    }
    let outcomes: Vec<TestOutcome> = slots.into_iter().map(|o| o.expect("every test completed")).collect();
    let qualified =
        tests.iter().zip(&outcomes).filter(|(t, _)| t.class == TestClass::Mandatory).all(|(_, o)| o.passed);
    Ok(Evaluation { qualified, outcomes, build_log: String::new() })
}
