//! `serve`: the session API over HTTP and WebSocket.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use clap::Args;
use mbci_core::feedback::SceneCatalog;
use mbci_core::par::Execution;
use mbci_core::session::SessionService;
use mbci_service::{router, serve_until, AppState};

use crate::{CliError, Outcome, DEFAULT_DATA_DIR};

#[derive(Clone, Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Default weight container for start requests that name none.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, env = "MBCI_DATA_DIR", default_value = DEFAULT_DATA_DIR)]
    pub out: PathBuf,
}

pub fn serve(a: ServeArgs, exec: Execution) -> Result<Outcome, CliError> {
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Internal(e.to_string()))?;
    let service = Arc::new(SessionService::new(&a.out, SceneCatalog::default()));
    let mut state = AppState::new(service.clone(), a.weights);
    state.execution = exec;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(a.addr)
            .await
            .map_err(|e| crate::user(format!("cannot listen on {}: {e}", a.addr)))?;
        println!("listening on http://{}", a.addr);
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        serve_until(listener, router(state), shutdown)
            .await
            .map_err(|e| CliError::Internal(e.to_string()))
    })?;
    // Seal a session still running at shutdown.
    let _ = service.stop();
    Ok(Outcome {
        summary: "server stopped".into(),
        result: Some(a.out),
    })
}
