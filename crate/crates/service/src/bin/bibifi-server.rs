use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Context;
use bibifi_runner::{IsolationProvider, LocalProvider};
use bibifi_service::backend::descriptor_for;
use bibifi_service::{api, auth, Contest, ContestConfig, RunnerBackend, SystemClock};
use clap::Parser;

/// Contest service: HTTP API over a durable event log.
#[derive(Parser)]
struct Args {
    /// Contest configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Directory holding the event log, snapshots and build products.
    #[arg(long)]
    data: PathBuf,
    /// Directory with the built oracle executables.
    #[arg(long)]
    oracle: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    listen: String,
    /// Read the admin token from here; a fresh one is written if absent.
    #[arg(long)]
    admin_token_file: Option<PathBuf>,
    /// Run untrusted code without filesystem confinement.
    #[arg(long)]
    unconfined: bool,
}

fn admin_token(path: &std::path::Path) -> anyhow::Result<String> {
    if let Ok(t) = std::fs::read_to_string(path) {
        return Ok(t.trim().to_owned());
    }
    let t = auth::new_token();
    std::fs::write(path, format!("{t}\n")).with_context(|| format!("writing {}", path.display()))?;
    use std::os::unix::fs::PermissionsExt;
    std::fs::set_permissions(path, std::fs::Permissions::from_mode(0o600))?;
    eprintln!("admin token written to {}", path.display());
    Ok(t)
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let config = ContestConfig::load(&args.config)?;
    let token_file = args.admin_token_file.unwrap_or_else(|| args.data.join("admin.token"));
    std::fs::create_dir_all(&args.data)?;
    let token = admin_token(&token_file)?;
    let provider: Arc<dyn IsolationProvider> =
        Arc::new(if args.unconfined { LocalProvider::unconfined() } else { LocalProvider::new() });
    let work = args.data.join("work");
    let backend = RunnerBackend::new(&config, descriptor_for(config.problem), provider, &args.oracle, &work)
        .map_err(anyhow::Error::msg)?;
    let contest = Contest::open(config, &args.data, Arc::new(backend), Arc::new(SystemClock), &token).map_err(anyhow::Error::msg)?;
    let listener = tokio::net::TcpListener::bind(&args.listen).await?;
    log::info!("listening on {}", listener.local_addr()?);
    api::serve(listener, contest).await?;
    Ok(())
}
