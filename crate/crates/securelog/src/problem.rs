use std::collections::BTreeSet;

use bibifi_runner::{Measure, ProblemDescriptor, Step, TestClass, TestDescriptor};
use bibifi_scoring::{BugCategory, Problem, SubmissionLimits};

fn append(args: &str) -> Step {
    Step::run("logappend", &args.split_whitespace().collect::<Vec<_>>()).expect(0, "")
}

fn read(args: &str, expected: &str) -> Step {
    Step::run("logread", &args.split_whitespace().collect::<Vec<_>>()).expect(0, expected)
}

fn rejected(program: &str, args: &str, msg: &str) -> Step {
    Step::run(program, &args.split_whitespace().collect::<Vec<_>>()).expect(255, msg)
}

/// The build-it test suite.
pub fn descriptor() -> ProblemDescriptor {
    let paper = vec![
        append("-K secret -A -G Fred logfile"),
        append("-K secret -A -G Jill logfile"),
        append("-K secret -A -G Fred -R 1 logfile"),
        append("-K secret -A -G Jill -R 1 logfile"),
        read("-K secret -S logfile", "Fred\nJill\n1: Fred,Jill"),
    ];
    let history = vec![
        append("-T 1 -K k1 -A -E Ann log"),
        append("-T 2 -K k1 -A -E Ann -R 4 log"),
        append("-T 3 -K k1 -L -E Ann -R 4 log"),
        append("-T 4 -K k1 -A -E Ann -R 2 log"),
        read("-K k1 -R -E Ann log", "4,2"),
        read("-K k1 -R -G Ann log", ""),
    ];
    let errors = vec![
        append("-T 5 -K k2 -A -G Bob log"),
        rejected("logappend", "-T 5 -K k2 -A -G Eve log", "invalid"),
        rejected("logappend", "-T 6 -K k2 -L -G Eve log", "invalid"),
        rejected("logappend", "-T 7 -K other -A -G Eve log", "invalid"),
        rejected("logread", "-K other -S log", "integrity violation"),
        read("-K k2 -S log", "Bob"),
    ];
    let rooms = vec![
        append("-T 1 -K k3 -A -E Zed log"),
        append("-T 2 -K k3 -A -G Amy log"),
        append("-T 3 -K k3 -A -E Zed -R 10 log"),
        append("-T 4 -K k3 -A -G Amy -R 9 log"),
        read("-K k3 -S log", "Zed\nAmy\n9: Amy\n10: Zed"),
    ];
    let empty = vec![
        append("-T 1 -K k4 -A -G Al log"),
        append("-T 2 -K k4 -L -G Al log"),
        read("-K k4 -S log", ""),
    ];
    let time = vec![
        append("-T 1 -K k5 -A -G Al log"),
        append("-T 5 -K k5 -L -G Al log"),
        read("-K k5 -T -G Al log", "4"),
    ];
    let intersection = vec![
        append("-T 1 -K k6 -A -G A log"),
        append("-T 2 -K k6 -A -G B log"),
        append("-T 3 -K k6 -A -G A -R 1 log"),
        append("-T 4 -K k6 -L -G A -R 1 log"),
        append("-T 5 -K k6 -A -G B -R 1 log"),
        append("-T 6 -K k6 -A -G A -R 2 log"),
        append("-T 7 -K k6 -L -G B -R 1 log"),
        append("-T 8 -K k6 -A -G B -R 2 log"),
        read("-K k6 -I -G A -G B log", "2"),
    ];
    let mut workload = Vec::new();
    for i in 0..40u64 {
        let who = if i % 2 == 0 { "-E Pat" } else { "-G Sam" };
        let step = match (i / 2) % 4 {
            0 => format!("-T {} -K perf -A {who} log", i + 1),
            1 => format!("-T {} -K perf -A {who} -R {} log", i + 1, 100 + i),
            2 => format!("-T {} -K perf -L {who} -R {} log", i + 1, 98 + i),
            _ => format!("-T {} -K perf -L {who} log", i + 1),
        };
        workload.push(append(&step));
    }
    let mut speed = workload.clone();
    speed.push(read("-K perf -R -E Pat log", "102,110,118,126,134"));
    let space = workload;

    ProblemDescriptor {
        problem: Problem::Securelog,
        artifacts: vec!["logappend".into(), "logread".into()],
        tests: vec![
            TestDescriptor::correctness("paper-example", TestClass::Mandatory, paper),
            TestDescriptor::correctness("history", TestClass::Mandatory, history),
            TestDescriptor::correctness("errors", TestClass::Mandatory, errors),
            TestDescriptor::correctness("room-order", TestClass::Optional, rooms),
            TestDescriptor::correctness("empty-gallery", TestClass::Optional, empty),
            TestDescriptor::correctness("time", TestClass::Optional, time),
            TestDescriptor::correctness("intersection", TestClass::Optional, intersection),
            TestDescriptor::performance("append-speed", Measure::WallTime, speed),
            TestDescriptor::performance("log-size", Measure::OutputBytes { file: Some("log".into()) }, space),
        ],
        break_categories: BTreeSet::from([
            BugCategory::Correctness,
            BugCategory::Crash,
            BugCategory::Privacy,
            BugCategory::Integrity,
        ]),
        limits: SubmissionLimits::for_problem(Problem::Securelog),
        loopback: false,
    }
}
