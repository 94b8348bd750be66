use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use dualcloak::embedding::FaceEmbedder;
use dualcloak::{Error, Result};
use tokio::sync::oneshot;

use crate::wire::{decode_image, mock_confidence, VerifyRequest, VerifyResponse};

type Shared = Arc<dyn FaceEmbedder>;

async fn verify(
    State(embedder): State<Shared>,
    Json(req): Json<VerifyRequest>,
) -> std::result::Result<Json<VerifyResponse>, (StatusCode, String)> {
    // Embedding is CPU-bound; keep it off the async workers.
    let scored = tokio::task::spawn_blocking(move || {
        let a = decode_image(&req.image_a)?;
        let b = decode_image(&req.image_b)?;
        mock_confidence(embedder.as_ref(), &a, &b)
    })
    .await
    .map_err(|e| (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    match scored {
        Ok(confidence) => Ok(Json(VerifyResponse { confidence })),
        Err(e) => Err((StatusCode::BAD_REQUEST, e.to_string())),
    }
}

/// Router exposing `POST /verify` for `embedder`.
pub fn router(embedder: Arc<dyn FaceEmbedder>) -> Router {
    Router::new()
        .route("/verify", post(verify))
        .with_state(embedder)
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::Transport {
            retries: 0,
            reason: format!("cannot start runtime: {e}"),
        })
}

fn bind_error(addr: SocketAddr, e: std::io::Error) -> Error {
    Error::Transport {
        retries: 0,
        reason: format!("cannot bind {addr}: {e}"),
    }
}

/// Serves until the process exits.
pub fn serve(embedder: Arc<dyn FaceEmbedder>, addr: SocketAddr) -> Result<()> {
    runtime()?.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| bind_error(addr, e))?;
        tracing::info!(addr = %listener.local_addr().map_err(|e| bind_error(addr, e))?, "mock verification service listening");
        axum::serve(listener, router(embedder))
            .await
            .map_err(|e| bind_error(addr, e))
    })
}

/// A mock server running on a background thread; stops when dropped.
pub struct MockServer {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl MockServer {
    /// Binds `addr` (port 0 picks a free port) and starts serving.
    pub fn start(embedder: Arc<dyn FaceEmbedder>, addr: SocketAddr) -> Result<Self> {
        let rt = runtime()?;
        let listener = rt
            .block_on(tokio::net::TcpListener::bind(addr))
            .map_err(|e| bind_error(addr, e))?;
        let local = listener.local_addr().map_err(|e| bind_error(addr, e))?;
        let (tx, rx) = oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            rt.block_on(async move {
                let shutdown = async {
                    let _ = rx.await;
                };
                if let Err(e) = axum::serve(listener, router(embedder))
                    .with_graceful_shutdown(shutdown)
                    .await
                {
                    tracing::error!("mock verification service stopped: {e}");
                }
            });
        });
        Ok(Self {
            addr: local,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Base URL, e.g. `http://127.0.0.1:34567`.
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stop(mut self) {
        self.shutdown_now();
    }

    fn shutdown_now(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.shutdown_now();
    }
}
