use std::sync::atomic::AtomicBool;
use std::time::Duration;

use bibifi_atm::harness::{privacy_verdict, run_mitm_session, MitmRunning, SessionEnd};
use bibifi_atm::mitm::{CommandClient, Strategy, ThreadMitm};
use bibifi_atm::{cli, judge_integrity_mitm, judge_privacy_mitm, AtmError, AtmPair, Flavor, InProcessPair, Mitm, MitmPorts, Secrets};
use bibifi_runner::Judgement;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

fn argv(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(17)
}

#[test]
fn paper_transcript_is_byte_exact() {
    let mut pair = InProcessPair::new(Flavor::Oracle).unwrap();
    let port = bibifi_runner::allocate_ports(1).unwrap()[0];
    pair.start_bank(port).unwrap();
    assert!(pair.dir().join("bank.auth").exists());
    let p = format!("-p {port} ");
    let create = pair.run_atm(&argv(&format!("{p}-s bank.auth -c bob.card -a bob -n 1000.00"))).unwrap();
    assert_eq!((create.exit_code, create.stdout.as_str()), (Some(0), "{\"account\":\"bob\",\"initial_balance\":1000}\n"));
    assert!(pair.dir().join("bob.card").exists());
    let withdraw = pair.run_atm(&argv(&format!("{p}-s bank.auth -c bob.card -a bob -w 63.10"))).unwrap();
    assert_eq!((withdraw.exit_code, withdraw.stdout.as_str()), (Some(0), "{\"account\":\"bob\",\"withdraw\":63.1}\n"));
    let over = pair.run_atm(&argv(&format!("{p}-a bob -w 936.91"))).unwrap();
    assert_eq!((over.exit_code, over.stdout.as_str()), (Some(255), ""));
    let bal = pair.run_atm(&argv(&format!("{p}-a bob -g"))).unwrap();
    assert_eq!(bal.stdout, "{\"account\":\"bob\",\"balance\":936.9}\n");
    let again = pair.run_atm(&argv(&format!("{p}-a bob -c bob2.card -n 5.00"))).unwrap();
    assert_eq!(again.exit_code, Some(255));
    assert!(!pair.dir().join("bob2.card").exists());
}

#[test]
fn bank_refuses_busy_port_and_existing_auth_file() {
    let dir = tempfile::tempdir().unwrap();
    let busy = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = busy.local_addr().unwrap().port().to_string();
    let stop = AtomicBool::new(true);
    let mut out = Vec::new();
    assert_eq!(cli::bank(&argv(&format!("-p {port}")), dir.path(), Flavor::Oracle, &stop, &mut out), 255);
    assert!(!dir.path().join("bank.auth").exists());
    std::fs::write(dir.path().join("bank.auth"), b"x").unwrap();
    let free = bibifi_runner::allocate_ports(1).unwrap()[0].to_string();
    assert_eq!(cli::bank(&argv(&format!("-p {free}")), dir.path(), Flavor::Oracle, &stop, &mut out), 255);
    assert!(out.is_empty());
}

#[test]
fn atm_without_a_bank_is_a_protocol_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bank.auth"), [0u8; 32]).unwrap();
    let port = bibifi_runner::allocate_ports(1).unwrap()[0];
    let out = cli::atm(&argv(&format!("-p {port} -a bob -n 1.00")), dir.path(), Flavor::Oracle, Duration::from_secs(1));
    assert_eq!(out.code, 63);
}

#[test]
fn replay_credits_the_nonce_free_fixture_twice() {
    let mut target = InProcessPair::new(Flavor::NonceFree).unwrap();
    let ports = MitmPorts::allocate().unwrap();
    let j = judge_integrity_mitm(&mut target, &ThreadMitm(Strategy::Replay), &ports, &mut rng()).unwrap();
    assert!(j.is_confirmed(), "{j:?}");
    let Judgement::Confirmed { evidence } = j else { unreachable!() };
    assert!(evidence.contains("200") && evidence.contains("150"), "{evidence}");
}

#[test]
fn replay_against_the_oracle_is_ignored_and_logged() {
    let mut target = InProcessPair::new(Flavor::Oracle).unwrap();
    let ports = MitmPorts::allocate().unwrap();
    let j = judge_integrity_mitm(&mut target, &ThreadMitm(Strategy::Replay), &ports, &mut rng()).unwrap();
    assert!(matches!(j, Judgement::Rejected { .. }), "{j:?}");
    let log = target.bank_log();
    assert!(log.lines().any(|l| l == "protocol_error"), "{log}");
    assert_eq!(log.matches("\"deposit\"").count(), 1, "{log}");
}

#[test]
fn sniffer_learns_the_amount_from_the_plaintext_fixture() {
    let mut target = InProcessPair::new(Flavor::Plaintext).unwrap();
    let ports = MitmPorts::allocate().unwrap();
    let j = judge_privacy_mitm(&mut target, &ThreadMitm(Strategy::Sniffer(1)), &ports, &mut rng()).unwrap();
    assert!(j.is_confirmed(), "{j:?}");
}

#[test]
fn sniffer_learns_nothing_from_the_oracle_or_nonce_free_fixture() {
    for flavor in [Flavor::Oracle, Flavor::NonceFree] {
        let mut target = InProcessPair::new(flavor).unwrap();
        let ports = MitmPorts::allocate().unwrap();
        let j = judge_privacy_mitm(&mut target, &ThreadMitm(Strategy::Sniffer(1)), &ports, &mut rng()).unwrap();
        assert!(matches!(j, Judgement::Rejected { .. }), "{flavor:?}: {j:?}");
    }
}

#[test]
fn dropped_connection_is_disallowed() {
    let mut target = InProcessPair::new(Flavor::Oracle).unwrap().with_atm_timeout(Duration::from_millis(300));
    let ports = MitmPorts::allocate().unwrap();
    let j = judge_integrity_mitm(&mut target, &ThreadMitm(Strategy::Drop), &ports, &mut rng()).unwrap();
    assert!(matches!(j, Judgement::Disallowed { .. }), "{j:?}");
}

#[test]
fn tampered_reply_is_disallowed() {
    let mut target = InProcessPair::new(Flavor::Oracle).unwrap();
    let ports = MitmPorts::allocate().unwrap();
    let j = judge_integrity_mitm(&mut target, &ThreadMitm(Strategy::Corrupt), &ports, &mut rng()).unwrap();
    assert!(matches!(j, Judgement::Disallowed { .. }), "{j:?}");
}

/// A MITM whose command-server conversation is a closure; it forwards traffic.
struct Scripted<F>(F);

struct Joined(Option<std::thread::JoinHandle<()>>);

impl MitmRunning for Joined {}

impl Drop for Joined {
    fn drop(&mut self) {
        if let Some(h) = self.0.take() {
            h.join().unwrap();
        }
    }
}

impl<F: Fn(&mut CommandClient) + Clone + Send + 'static> Mitm for Scripted<F> {
    fn start(&self, ports: &MitmPorts) -> Result<Box<dyn MitmRunning>, AtmError> {
        let (f, ports) = (self.0.clone(), *ports);
        Ok(Box::new(Joined(Some(std::thread::spawn(move || {
            let _proxy = bibifi_atm::mitm::Proxy::start(ports.listen, ports.bank, bibifi_atm::mitm::Relay::Forward).unwrap();
            let mut c = CommandClient::connect(ports.command).unwrap();
            f(&mut c);
        })))))
    }
}

fn session<F: Fn(&mut CommandClient) + Clone + Send + 'static>(f: F) -> bibifi_atm::MitmTranscript {
    let mut target = InProcessPair::new(Flavor::Oracle).unwrap();
    let ports = MitmPorts::allocate().unwrap();
    let secrets = Secrets { amount: "42.17".parse().unwrap(), account: "hiddenname".into() };
    run_mitm_session(&mut target, &Scripted(f), &ports, &secrets).unwrap()
}

#[test]
fn command_server_rules() {
    let t = session(|c| {
        let created = c.command(&["-a", "alice", "-n", "5.00"]).unwrap();
        assert_eq!(created.exit, Some(0));
        assert_eq!(created.output.as_deref(), Some("{\"account\":\"alice\",\"initial_balance\":5}\n"));
        let card = c.getcard("alice").unwrap().expect("own card");
        assert_eq!(card.len(), 32);
        let secret = c.command(&["-a", "%ACCOUNT%", "-n", "%AMOUNT%"]).unwrap();
        assert_eq!((secret.exit, secret.output), (None, None));
        assert_eq!(c.getcard("%ACCOUNT%").unwrap(), None);
        assert_eq!(c.getcard("hiddenname").unwrap(), None);
        assert_eq!(c.getcard("nobody").unwrap(), None);
        c.command(&["-a", "bob", "-n", "%AMOUNT%"]).unwrap();
        let probe = c.command(&["-a", "bob", "-g"]).unwrap();
        assert_eq!((probe.exit, probe.output), (None, None));
        assert_eq!(c.getcard("bob").unwrap(), None);
        assert_eq!(c.guess("amount", "42.17").unwrap(), json!({"ok": true}));
        assert!(c.guess("amount", "1.00").unwrap().get("error").is_some());
        assert_eq!(c.done().unwrap(), json!({"ok": true}));
    });
    assert_eq!(t.end, SessionEnd::Done);
    assert_eq!(t.revealed.iter().collect::<Vec<_>>(), ["alice"]);
    assert_eq!(t.commands[1].argv, argv("-a hiddenname -n 42.17"));
    assert!(t.balances.contains_key("hiddenname") && t.balances.contains_key("bob") && !t.balances.contains_key("alice"));
    assert!(privacy_verdict(&t).is_confirmed());
}

#[test]
fn malformed_requests_end_the_test_rejected() {
    let bad_json = session(|c| {
        let r: Value = c.request(&json!({"launch": "missiles"})).unwrap();
        assert!(r.get("error").is_some());
    });
    assert!(matches!(bad_json.end, SessionEnd::Malformed(_)));
    assert!(matches!(privacy_verdict(&bad_json), Judgement::Rejected { .. }));

    let reserved = session(|c| {
        let r = c.request(&json!({"command": ["-p", "1234", "-a", "x", "-g"]})).unwrap();
        assert!(r.get("error").is_some());
    });
    assert!(matches!(reserved.end, SessionEnd::Malformed(_)));

    let abandoned = session(|c| {
        c.command(&["-a", "x", "-n", "1.00"]).unwrap();
    });
    assert!(matches!(abandoned.end, SessionEnd::Abandoned(_)));
}

#[test]
fn wrong_guess_is_rejected() {
    let t = session(|c| {
        c.command(&["-a", "%ACCOUNT%", "-n", "%AMOUNT%"]).unwrap();
        c.guess("amount", "42.18").unwrap();
        c.guess("account", "hiddenname2").unwrap();
        c.done().unwrap();
    });
    assert!(matches!(privacy_verdict(&t), Judgement::Rejected { .. }));
    let numeric = session(|c| {
        c.request(&json!({"guess": {"amount": 42.17}})).unwrap();
        c.done().unwrap();
    });
    assert!(privacy_verdict(&numeric).is_confirmed());
}
