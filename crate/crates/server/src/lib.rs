//! HTTP service for the food-record workflow: uploads, analysis, the
//! participant review loop, researcher annotation and dataset export.
//!
//! All endpoints live under `/api/v1`; see [`routes::router`].

pub mod config;
pub mod error;
pub mod export;
pub mod routes;
pub mod service;
pub mod testkit;
pub mod thumbnail;

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::Router;
use tokio::net::TcpListener;
use tokio::sync::oneshot;

pub use config::{AnalysisMode, ServerConfig};
pub use error::{ApiError, ErrorCode};
pub use routes::{router, AppState, Tokens};
pub use service::{Service, ServiceOptions};

/// Builds the service and router for a validated configuration. Interrupted
/// work from a previous run is resumed before the router is returned.
pub fn build(config: &ServerConfig) -> anyhow::Result<(Router, Arc<Service>)> {
    config.validate()?;
    let service = Arc::new(Service::from_config(config)?);
    let report = service.resume(config.analysis_mode != AnalysisMode::Deferred)?;
    if report != Default::default() {
        tracing::info!(
            analyzed = report.analyzed.len(),
            refined = report.refined.len(),
            failed = report.failed.len(),
            "resumed interrupted work"
        );
    }
    let state = AppState {
        service: service.clone(),
        tokens: Arc::new(Tokens {
            participant: config.participant_token.clone().unwrap_or_default(),
            researcher: config.researcher_token.clone().unwrap_or_default(),
        }),
        mode: config.analysis_mode,
    };
    Ok((router(state, config.ui_dir.clone()), service))
}

pub async fn serve(
    listener: TcpListener,
    app: Router,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await
}

/// A server running on its own thread and runtime, stopped on drop.
pub struct RunningServer {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl RunningServer {
    /// Serves `app` on an ephemeral localhost port.
    pub fn start(app: Router) -> std::io::Result<Self> {
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()?;
        let std_listener = std::net::TcpListener::bind("127.0.0.1:0")?;
        std_listener.set_nonblocking(true)?;
        let addr = std_listener.local_addr()?;
        let (stop, stopped) = oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            runtime.block_on(async move {
                let listener = TcpListener::from_std(std_listener).expect("listener");
                let _ = serve(listener, app, async {
                    let _ = stopped.await;
                })
                .await;
            });
        });
        Ok(Self {
            addr,
            stop: Some(stop),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(thread) = self.thread.take() {
            let _ = thread.join();
        }
    }
}
