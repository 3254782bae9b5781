//! HTTP service for the dermalens analysis engine.
//!
//! The five documented endpoints keep their original request and response
//! shapes; everything else is additive. Every error body is a JSON object
//! with an `error` field.

pub mod artifacts;
pub mod config;
pub mod engine;
pub mod error;
pub mod feedback;
pub mod jobs;
mod routes;
pub mod upload;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use parking_lot::RwLock;
use thiserror::Error;

pub use config::{ConfigError, FeatureMaskMode, ProviderPins, ServiceConfig};
pub use engine::Engine;
pub use routes::router;

use artifacts::ArtifactCache;
use feedback::{FeedbackError, FeedbackStore};
use jobs::JobStore;

#[derive(Debug, Error)]
pub enum StartupError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Feedback(#[from] FeedbackError),
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("server error: {0}")]
    Serve(std::io::Error),
}

/// Shared state behind every handler.
pub struct AppState {
    engine: RwLock<Arc<Engine>>,
    config_path: Option<PathBuf>,
    pub artifacts: ArtifactCache,
    pub feedback: FeedbackStore,
    pub jobs: JobStore,
}

impl AppState {
    /// Build providers and open the feedback store; any problem aborts startup.
    pub fn new(config: ServiceConfig, config_path: Option<PathBuf>) -> Result<Arc<Self>, StartupError> {
        let feedback = FeedbackStore::open(&config.feedback_path)?;
        let artifacts = ArtifactCache::new(config.artifact_cache_mb.saturating_mul(1 << 20));
        let engine = Engine::build(config)?;
        Ok(Arc::new(Self { engine: RwLock::new(Arc::new(engine)), config_path, artifacts, feedback, jobs: JobStore::default() }))
    }

    pub fn from_config_file(path: PathBuf) -> Result<Arc<Self>, StartupError> {
        let config = ServiceConfig::load(&path)?;
        Self::new(config, Some(path))
    }

    /// Snapshot of the current engine; a concurrent reload does not affect it.
    pub fn engine(&self) -> Arc<Engine> {
        self.engine.read().clone()
    }

    pub fn config_path(&self) -> Option<&PathBuf> {
        self.config_path.as_ref()
    }

    /// Re-read the config file and swap in new providers. On error the old
    /// engine stays. Listening address, feedback path and cache size are
    /// fixed at startup.
    pub fn reload(&self) -> Result<Arc<Engine>, ConfigError> {
        let path = self.config_path.as_ref().ok_or_else(|| ConfigError::Invalid("the server was started without a config file".into()))?;
        let engine = Arc::new(Engine::build(ServiceConfig::load(path)?)?);
        *self.engine.write() = engine.clone();
        Ok(engine)
    }
}

/// Listen on the configured address until Ctrl-C.
pub async fn serve(state: Arc<AppState>) -> Result<(), StartupError> {
    let cfg = state.engine().config.clone();
    let addr = format!("{}:{}", cfg.host, cfg.port);
    let listener = tokio::net::TcpListener::bind(&addr).await.map_err(|source| StartupError::Bind { addr: addr.clone(), source })?;
    let local: SocketAddr = listener.local_addr().map_err(StartupError::Serve)?;
    tracing::info!("listening on http://{local}");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(StartupError::Serve)
}
