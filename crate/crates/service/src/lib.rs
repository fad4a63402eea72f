//! HTTP service over doclabeler projects.
//!
//! Every mutation names the page version it was based on; a stale version
//! gets `409` with the current page so the client can rebase. Writes to a
//! page are serialized and hit the page file before the response is sent.

mod api;
mod error;
mod state;

use std::net::SocketAddr;
use std::sync::Arc;

pub use api::{router, Applied, AutolabelResponse, EvaluateResponse, PageDelta, PageView, ReportRow};
pub use error::{ApiError, ErrorBody};
pub use state::{JobStatus, ProjectHandle, Service, EXPORTS_DIR, PROJECTS_DIR};

/// Loopback only; the service never listens on external interfaces unless
/// asked to.
pub const DEFAULT_ADDR: &str = "127.0.0.1:8750";

/// Binds `addr` and serves in a background task. Returns the bound address,
/// useful with port 0.
pub async fn spawn(
    service: Arc<Service>,
    addr: SocketAddr,
) -> std::io::Result<(SocketAddr, tokio::task::JoinHandle<()>)> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    let app = router(service);
    let task = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            log::error!("server stopped: {e}");
        }
    });
    Ok((local, task))
}

/// Serves until the process is stopped.
pub async fn serve(service: Arc<Service>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(service)).await
}
