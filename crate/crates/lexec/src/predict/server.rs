//! HTTP server exposing any in-process predictor.
//!
//! Protocol: `POST /predict` with the query JSON, answered by
//! `{"predictions": [{"label", "score"}, ...]}`; `GET /health` answers
//! `{"status":"ok"}`. A neural backend plugs in by implementing the same
//! two routes.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;

use super::{Predictor, PredictorQuery, WireResponse};

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot bind port {port}: {source}")]
    Bind {
        port: u16,
        #[source]
        source: std::io::Error,
    },
    #[error("server runtime failed: {0}")]
    Runtime(String),
}

/// A running prediction server; shuts down when dropped.
pub struct PredictionServer {
    addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    handle: Option<std::thread::JoinHandle<()>>,
}

impl PredictionServer {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

impl Drop for PredictionServer {
    fn drop(&mut self) {
        self.stop();
    }
}

fn router(predictor: Arc<dyn Predictor>) -> Router {
    Router::new()
        .route("/predict", post(predict_route))
        .route("/health", get(health_route))
        .with_state(predictor)
}

async fn health_route() -> Json<serde_json::Value> {
    Json(json!({"status": "ok"}))
}

async fn predict_route(
    State(predictor): State<Arc<dyn Predictor>>,
    Json(query): Json<PredictorQuery>,
) -> Response {
    match predictor.predict(&query) {
        Ok(resp) => Json(WireResponse::from_response(&resp)).into_response(),
        Err(e) => (
            StatusCode::INTERNAL_SERVER_ERROR,
            Json(json!({"error": e.to_string()})),
        )
            .into_response(),
    }
}

/// Serves `predictor` on 127.0.0.1:`port` (0 picks a free port). The server
/// runs on its own thread with a dedicated runtime.
pub fn serve(predictor: Arc<dyn Predictor>, port: u16) -> Result<PredictionServer, ServeError> {
    let listener =
        std::net::TcpListener::bind(("127.0.0.1", port)).map_err(|source| ServeError::Bind {
            port,
            source,
        })?;
    listener
        .set_nonblocking(true)
        .map_err(|source| ServeError::Bind { port, source })?;
    let addr = listener
        .local_addr()
        .map_err(|source| ServeError::Bind { port, source })?;

    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let handle = std::thread::Builder::new()
        .name("lexec-predict-server".to_string())
        .spawn(move || {
            let rt = tokio::runtime::Builder::new_current_thread()
                .enable_all()
                .build()
                .expect("server runtime");
            rt.block_on(async move {
                let listener =
                    tokio::net::TcpListener::from_std(listener).expect("listener handoff");
                let app = router(predictor);
                let served = axum::serve(listener, app).with_graceful_shutdown(async {
                    let _ = rx.await;
                });
                if let Err(e) = served.await {
                    eprintln!("prediction server stopped: {e}");
                }
            });
        })
        .map_err(|e| ServeError::Runtime(e.to_string()))?;

    Ok(PredictionServer {
        addr,
        shutdown: Some(tx),
        handle: Some(handle),
    })
}
