//! How the client reaches a service: directly in process, or as JSON over HTTP.

use std::io;
use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::Router;

use crate::service::{Endpoint, Service, ServiceError};
use crate::wire::ErrorResponse;

/// Responses above this size are treated as a network failure.
pub const MAX_BODY: u64 = 256 << 20;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error("network: {0}")]
    Network(String),
}

pub trait Transport: Send + Sync {
    /// Label used for bandwidth accounting.
    fn peer(&self) -> &str;
    fn call(&self, endpoint: Endpoint, body: &[u8]) -> Result<Vec<u8>, TransportError>;
}

pub struct InProcess {
    name: String,
    service: Arc<dyn Service>,
}

impl InProcess {
    pub fn new(name: impl Into<String>, service: Arc<dyn Service>) -> Self {
        Self { name: name.into(), service }
    }
}

impl Transport for InProcess {
    fn peer(&self) -> &str {
        &self.name
    }

    fn call(&self, endpoint: Endpoint, body: &[u8]) -> Result<Vec<u8>, TransportError> {
        Ok(self.service.handle(endpoint, body)?)
    }
}

pub struct Http {
    base: String,
    agent: ureq::Agent,
}

impl Http {
    pub fn new(base_url: &str, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self { base: base_url.trim_end_matches('/').to_string(), agent }
    }
}

impl Transport for Http {
    fn peer(&self) -> &str {
        &self.base
    }

    fn call(&self, endpoint: Endpoint, body: &[u8]) -> Result<Vec<u8>, TransportError> {
        let net = |e: ureq::Error| TransportError::Network(e.to_string());
        let mut resp = self
            .agent
            .post(format!("{}{}", self.base, endpoint.path()))
            .content_type("application/json")
            .send(body)
            .map_err(net)?;
        let status = resp.status().as_u16();
        let bytes = resp.body_mut().with_config().limit(MAX_BODY).read_to_vec().map_err(net)?;
        if status == 200 {
            return Ok(bytes);
        }
        let message = serde_json::from_slice::<ErrorResponse>(&bytes)
            .map(|e| e.error)
            .unwrap_or_else(|_| String::from_utf8_lossy(&bytes).into_owned());
        Err(ServiceError::from_status(status, message).into())
    }
}

type Shared = Arc<dyn Service>;

async fn dispatch(service: Shared, endpoint: Endpoint, body: Bytes) -> (StatusCode, Vec<u8>) {
    let out = tokio::task::spawn_blocking(move || service.handle(endpoint, &body)).await;
    let err = match out {
        Ok(Ok(bytes)) => return (StatusCode::OK, bytes),
        Ok(Err(e)) => e,
        Err(e) => ServiceError::Internal(e.to_string()),
    };
    let status = StatusCode::from_u16(err.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    let body = serde_json::to_vec(&ErrorResponse { error: err.to_string() }).unwrap_or_default();
    (status, body)
}

pub fn router(service: Shared) -> Router {
    let mut r = Router::new();
    for e in Endpoint::ALL {
        r = r.route(e.path(), post(move |State(s): State<Shared>, body: Bytes| dispatch(s, e, body)));
    }
    r.with_state(service)
}

/// Serves until ctrl-c.
pub fn serve(addr: SocketAddr, service: Shared) -> io::Result<()> {
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, router(service))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })
}

/// A server on a background thread, stopped on drop.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<JoinHandle<io::Result<()>>>,
}

impl ServerHandle {
    pub fn spawn(addr: SocketAddr, service: Shared) -> io::Result<Self> {
        let std_listener = std::net::TcpListener::bind(addr)?;
        std_listener.set_nonblocking(true)?;
        let addr = std_listener.local_addr()?;
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(std_listener)?;
                axum::serve(listener, router(service))
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await
            })
        });
        Ok(Self { addr, stop: Some(tx), thread: Some(thread) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
