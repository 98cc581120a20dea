//! HTTP service for blinded listening campaigns.
//!
//! Raters join with an invite token, give consent, and fetch pages that
//! carry only opaque slot ids and clip URLs. Submissions are gated on
//! complete playback of every slot, validated, and appended to a
//! per-campaign ratings log; DG scores are recomputed here. Admin routes
//! export the unblinded dataset in the canonical CSV or JSON-lines form.
//!
//! Data directory layout:
//!
//! ```text
//! campaigns/<id>.json     frozen pages, invites, clip tokens
//! sessions/<id>.json      digest-checked session state
//! events/<session>.jsonl  interaction events
//! ratings/<id>.jsonl      append-only rating records
//! anchors/*.wav           cached Anchor-X renders
//! ```

pub mod api;
pub mod audio;
pub mod campaign;
pub mod config;
pub mod payload;
pub mod state;

use std::net::SocketAddr;
use std::sync::Arc;

use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

pub use api::{router, ApiError};
pub use campaign::{Campaign, CampaignStatus};
pub use config::Config;
pub use payload::{DonePayload, PagePayload, SlotPayload};
pub use state::AppState;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error(transparent)]
    Core(#[from] mushra_core::Error),
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// A server running on a background task.
pub struct RunningServer {
    pub addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    handle: JoinHandle<std::io::Result<()>>,
}

impl RunningServer {
    pub fn url(&self, path: &str) -> String {
        format!("http://{}{path}", self.addr)
    }

    /// Stops accepting connections and waits for in-flight requests.
    pub async fn shutdown(mut self) -> std::io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        self.handle.await.map_err(std::io::Error::other)?
    }
}

/// Binds and starts serving on the current tokio runtime.
pub async fn start(config: Config) -> Result<RunningServer, ServerError> {
    let bind = format!("{}:{}", config.bind, config.port);
    let state = tokio::task::spawn_blocking(move || AppState::open(config))
        .await
        .map_err(std::io::Error::other)??;
    let app = router(Arc::new(state));
    let listener = TcpListener::bind(&bind).await?;
    let addr = listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let handle = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await
    });
    log::info!("listening on http://{addr}");
    Ok(RunningServer {
        addr,
        shutdown: Some(tx),
        handle,
    })
}

/// Serves until interrupted with Ctrl-C.
pub async fn serve(config: Config) -> Result<(), ServerError> {
    let server = start(config).await?;
    println!("listening on http://{}", server.addr);
    tokio::signal::ctrl_c().await?;
    server.shutdown().await?;
    Ok(())
}
