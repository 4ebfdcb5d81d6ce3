use std::collections::BTreeSet;

use bibifi_runner::{Measure, ProblemDescriptor, Ready, Step, TestClass, TestDescriptor};
use bibifi_scoring::{BugCategory, Problem, SubmissionLimits};

fn bank() -> Step {
    Step::Start {
        name: "bank".into(),
        program: "bank".into(),
        args: vec!["-p".into(), "{port:bank}".into(), "-s".into(), "bank.auth".into()],
        ready: Ready::Line("created".into()),
    }
}

fn atm_args(args: &str) -> Vec<String> {
    let mut v = vec!["-p".to_string(), "{port:bank}".into(), "-s".into(), "bank.auth".into()];
    v.extend(args.split_whitespace().map(String::from));
    v
}

fn atm(args: &str, receipt: &str) -> Step {
    let a = atm_args(args);
    Step::run("atm", &a.iter().map(String::as_str).collect::<Vec<_>>()).expect(0, receipt)
}

fn refused(args: &str) -> Step {
    let a = atm_args(args);
    Step::run("atm", &a.iter().map(String::as_str).collect::<Vec<_>>()).expect(255, "")
}

fn with_bank(steps: Vec<Step>) -> Vec<Step> {
    let mut s = vec![bank()];
    s.extend(steps);
    s.push(Step::Stop { name: "bank".into() });
    s
}

/// The build-it test suite.
pub fn descriptor() -> ProblemDescriptor {
    let paper = with_bank(vec![
        atm("-c bob.card -a bob -n 1000.00", r#"{"account":"bob","initial_balance":1000}"#),
        atm("-c bob.card -a bob -w 63.10", r#"{"account":"bob","withdraw":63.1}"#),
    ]);
    let balance = with_bank(vec![
        atm("-a ann -n 10.00", r#"{"account":"ann","initial_balance":10}"#),
        atm("-a ann -d 2.50", r#"{"account":"ann","deposit":2.5}"#),
        atm("-a ann -w 0.05", r#"{"account":"ann","withdraw":0.05}"#),
        atm("-a ann -g", r#"{"account":"ann","balance":12.45}"#),
    ]);
    let errors = with_bank(vec![
        atm("-a cy -n 5.00", r#"{"account":"cy","initial_balance":5}"#),
        refused("-a cy -w 5.01"),
        refused("-a cy -c other.card -n 1.00"),
        refused("-a dee -c cy.card -g"),
        refused("-a cy -c missing.card -g"),
        atm("-a cy -g", r#"{"account":"cy","balance":5}"#),
    ]);
    let bounds = with_bank(vec![
        atm("-a max -n 4294967295.99", r#"{"account":"max","initial_balance":4294967295.99}"#),
        refused("-a max -d 0.01"),
        atm("-a zero -n 0.00", r#"{"account":"zero","initial_balance":0}"#),
        atm("-a zero -d 4294967295.99", r#"{"account":"zero","deposit":4294967295.99}"#),
    ]);
    let arguments = with_bank(vec![
        refused("-a eve -n 1.234"),
        refused("-a eve -n 01.00"),
        refused("-a Eve -n 1.00"),
        refused("-a eve -n 1.00 -g"),
        refused("-a eve -d 0.00"),
        atm("-a eve -n 1.5", r#"{"account":"eve","initial_balance":1.5}"#),
    ]);
    let mut workload = vec![];
    for i in 0..10 {
        workload.push(atm(&format!("-a u{i} -n 100.00"), &format!(r#"{{"account":"u{i}","initial_balance":100}}"#)));
        workload.push(atm(&format!("-a u{i} -d 1.{i:02}"), &format!(r#"{{"account":"u{i}","deposit":{}}}"#, crate::Amount(100 + i).render())));
        workload.push(atm(&format!("-a u{i} -w 50.00"), &format!(r#"{{"account":"u{i}","withdraw":50}}"#)));
    }

    ProblemDescriptor {
        problem: Problem::Atm,
        artifacts: vec!["atm".into(), "bank".into()],
        tests: vec![
            TestDescriptor::correctness("paper-example", TestClass::Mandatory, paper),
            TestDescriptor::correctness("balance", TestClass::Mandatory, balance),
            TestDescriptor::correctness("errors", TestClass::Mandatory, errors),
            TestDescriptor::correctness("bounds", TestClass::Optional, bounds),
            TestDescriptor::correctness("arguments", TestClass::Optional, arguments),
            TestDescriptor::performance("transactions", Measure::WallTime, with_bank(workload)),
        ],
        break_categories: BTreeSet::from([
            BugCategory::Correctness,
            BugCategory::Crash,
            BugCategory::Privacy,
            BugCategory::Integrity,
        ]),
        limits: SubmissionLimits::for_problem(Problem::Atm),
        loopback: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pair::{AtmPair, InProcessPair};
    use crate::Flavor;

    fn replay(flavor: Flavor) -> Vec<(String, bool)> {
        descriptor()
            .tests
            .iter()
            .map(|t| {
                let mut pair = InProcessPair::new(flavor).unwrap();
                let port = bibifi_runner::allocate_ports(1).unwrap()[0].to_string();
                let ok = t.script.iter().all(|step| match step {
                    Step::Start { .. } => pair.start_bank(port.parse().unwrap()).is_ok(),
                    Step::Stop { .. } => {
                        pair.stop_bank();
                        true
                    }
                    Step::Run { args, expect_exit, expect_stdout, .. } => {
                        let args: Vec<String> = args.iter().map(|a| a.replace("{port:bank}", &port)).collect();
                        let r = pair.run_atm(&args).unwrap();
                        expect_exit.is_none_or(|c| Some(c) == r.exit_code)
                            && expect_stdout.as_ref().is_none_or(|e| bibifi_runner::outputs_match(e, &r.stdout))
                    }
                    Step::Send { .. } => false,
                });
                (t.id.clone(), ok)
            })
            .collect()
    }

    #[test]
    fn descriptor_is_valid_and_every_flavor_passes() {
        descriptor().validate().unwrap();
        for flavor in [Flavor::Oracle, Flavor::NonceFree, Flavor::Plaintext] {
            for (id, ok) in replay(flavor) {
                assert!(ok, "{flavor:?} fails {id}");
            }
        }
    }
}
