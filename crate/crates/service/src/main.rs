use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use trajseg_service::{open_database, router, AppState, ServiceConfig};

/// Serve a trajectory store over HTTP.
///
/// Settings come from the optional TOML file; TRAJ_LISTEN and TRAJ_DATA_DIR
/// override it.
#[derive(Debug, Parser)]
#[command(name = "trajseg-service", version)]
struct Args {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match ServiceConfig::from_process_env(args.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let db = match open_database(&cfg) {
        Ok(db) => db,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let addr = cfg.listen_addr().expect("validated");
    let listener = match tokio::net::TcpListener::bind(addr).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: listen {addr}: {e}");
            return ExitCode::FAILURE;
        }
    };
    eprintln!(
        "serving {} trajectories from {} on http://{addr}",
        db.segments().num_trajectories(),
        cfg.data_dir.display()
    );
    let app = router(AppState::new(db, cfg));
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    if let Err(e) = axum::serve(listener, app).with_graceful_shutdown(shutdown).await {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
