//! Network face of the play engine: sessions over HTTP, turn events over a
//! WebSocket. All play logic stays in `dramaturg-core`.

pub mod config;
pub mod problem;
pub mod registry;
pub mod routes;

use std::sync::Arc;

pub use config::ServiceConfig;
pub use problem::Problem;
pub use registry::{ApiSession, CreateSession, EventFrame, Registry};
pub use routes::router;

/// Build the application for a config.
pub fn app(config: ServiceConfig) -> Result<axum::Router, String> {
    Ok(router(Arc::new(Registry::new(config)?)))
}

pub async fn serve(config: ServiceConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(&config.bind).await?;
    log::info!("listening on {}", listener.local_addr()?);
    let app = app(config).map_err(std::io::Error::other)?;
    axum::serve(listener, app).await
}
