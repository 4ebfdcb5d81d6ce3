use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Context;
use bibifi_judge::{BreakSubmission, Judge, Payload, TargetBuild};
use bibifi_runner::{Artifacts, IsolationProvider, LocalProvider};
use bibifi_scoring::{BugCategory, Problem, ReportId, TeamId};
use bibifi_service::backend::descriptor_for;
use bibifi_service::client::Client;
use bibifi_service::{ContestConfig, Store};
use clap::{Parser, Subcommand};
use serde_json::json;

/// Organizer tool: wraps the admin endpoints and adjudicates locally.
#[derive(Parser)]
struct Args {
    #[arg(long, env = "BIBIFI_URL", default_value = "http://127.0.0.1:8080")]
    url: String,
    #[arg(long, env = "BIBIFI_TOKEN")]
    token: Option<String>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Move the contest to a later phase.
    Phase { phase: String },
    /// List fixes with their prechecks.
    Fixes,
    /// Record an atomicity decision on a fix.
    Decide {
        #[arg(long)]
        fix: u64,
        #[arg(long, conflicts_with = "reject", required_unless_present = "reject")]
        approve: bool,
        #[arg(long)]
        reject: bool,
        #[arg(long)]
        judge: String,
        #[arg(long, default_value = "")]
        rationale: String,
    },
    OracleBugs,
    Scoreboard {
        #[arg(long)]
        csv: bool,
    },
    Events {
        #[arg(long, default_value_t = 0)]
        since: u64,
    },
    /// Register a team and print its token.
    Register { team: String, members: Vec<String> },
    /// Fold an event log offline and print the scoreboard.
    Replay {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Judge one break payload against a built target, without a server.
    Adjudicate {
        #[arg(long)]
        problem: Problem,
        /// Built oracle executables.
        #[arg(long)]
        oracle: PathBuf,
        /// Built target executables.
        #[arg(long)]
        target: PathBuf,
        /// Payload JSON file.
        #[arg(long)]
        payload: PathBuf,
        #[arg(long)]
        claim: BugCategory,
        /// Challenge logs (JSON) for log-problem security payloads.
        #[arg(long)]
        challenges: Option<PathBuf>,
        #[arg(long)]
        unconfined: bool,
    },
}

fn print(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json prints"));
}

fn main() -> anyhow::Result<()> {
    env_logger::init();
    let args = Args::parse();
    let client = Client::new(&args.url, args.token.clone());
    match args.cmd {
        Cmd::Phase { phase } => print(&client.post("/admin/phase", &json!({ "phase": phase }))?),
        Cmd::Fixes => print(&client.get("/admin/fixes")?),
        Cmd::Decide { fix, approve, reject: _, judge, rationale } => {
            print(&client.post("/admin/fix-decision", &json!({ "fix": fix, "approve": approve, "judge": judge, "rationale": rationale }))?)
        }
        Cmd::OracleBugs => print(&client.get("/admin/oracle-bugs")?),
        Cmd::Scoreboard { csv: true } => print!("{}", client.get_text("/scoreboard.csv")?),
        Cmd::Scoreboard { csv: false } => print(&client.get("/scoreboard")?),
        Cmd::Events { since } => print(&client.get(&format!("/events?since={since}"))?),
        Cmd::Register { team, members } => print(&client.post("/teams", &json!({ "team": team, "members": members }))?),
        Cmd::Replay { data, config } => {
            let config = ContestConfig::load(&config)?;
            let state = Store::replay(&data)?;
            println!("{}", serde_json::to_string(&state.scoreboard(&config.params()))?);
        }
        Cmd::Adjudicate { problem, oracle, target, payload, claim, challenges, unconfined } => {
            let descriptor = descriptor_for(problem);
            let provider: Arc<dyn IsolationProvider> =
                Arc::new(if unconfined { LocalProvider::unconfined() } else { LocalProvider::new() });
            let oracle = Artifacts::from_dir(oracle, &descriptor.artifacts)?;
            let judge = Judge::new(problem, provider, oracle, descriptor.loopback);
            let payload: Payload = serde_json::from_slice(&std::fs::read(&payload).context("reading payload")?)?;
            let challenges = match challenges {
                Some(p) => serde_json::from_slice(&std::fs::read(p)?)?,
                None => vec![],
            };
            let build = TargetBuild { team: TeamId("target".into()), artifacts: Artifacts::from_dir(target, &descriptor.artifacts)?, challenges };
            let sub = BreakSubmission { breaker: TeamId("breaker".into()), target: build.team.clone(), claim, payload };
            let d = judge.adjudicate(&sub, &build, &[], ReportId(1))?;
            print(&serde_json::to_value(&d)?);
            if !d.outcome.is_accepted() {
                std::process::exit(1);
            }
        }
    }
    Ok(())
}
