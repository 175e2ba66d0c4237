use std::path::PathBuf;

use clap::Parser;

use sketchface::suggest::SuggestionIndex;
use sketchface_service::{router, AppState, ServiceConfig};

/// Serves modeling sessions over HTTP and WebSocket.
#[derive(Parser)]
#[command(version)]
struct Args {
    #[arg(long, env = "SKETCHFACE_HOST", default_value = "127.0.0.1")]
    host: String,
    #[arg(long, env = "SKETCHFACE_PORT", default_value_t = 8080)]
    port: u16,
    /// Suggestion corpus JSON; the bundled corpus when omitted.
    #[arg(long, env = "SKETCHFACE_CORPUS")]
    corpus: Option<PathBuf>,
    /// Write refinement intermediates per session under this directory.
    #[arg(long, env = "SKETCHFACE_DEBUG_DIR")]
    debug_dir: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let corpus = match &args.corpus {
        Some(p) => SuggestionIndex::load(p)?,
        None => SuggestionIndex::builtin(),
    };
    let config = ServiceConfig {
        corpus,
        debug_dir: args.debug_dir,
        ..Default::default()
    };
    let listener = tokio::net::TcpListener::bind((args.host.as_str(), args.port)).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(config))).await?;
    Ok(())
}
