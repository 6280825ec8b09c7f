use std::net::SocketAddr;
use std::sync::Arc;

use axum::http::HeaderValue;

/// Settings come from the environment: `DOSEFIND_ADDR` (default
/// 127.0.0.1:8080), `DOSEFIND_DATA` (session logs, default ./trials) and
/// `DOSEFIND_UI_ORIGIN` (CORS origin, default any).
#[tokio::main]
async fn main() {
    tracing_subscriber::fmt::init();
    let addr: SocketAddr = std::env::var("DOSEFIND_ADDR")
        .unwrap_or_else(|_| "127.0.0.1:8080".into())
        .parse()
        .unwrap_or_else(|e| fail(format!("DOSEFIND_ADDR: {e}")));
    let dir = std::env::var("DOSEFIND_DATA").unwrap_or_else(|_| "trials".into());
    let origin = std::env::var("DOSEFIND_UI_ORIGIN")
        .ok()
        .map(|o| HeaderValue::from_str(&o).unwrap_or_else(|e| fail(format!("DOSEFIND_UI_ORIGIN: {e}"))));
    let store = dosefind_service::Store::open(&dir).unwrap_or_else(|e| fail(e.to_string()));
    let app = dosefind_service::router(Arc::new(store), origin);
    let listener = tokio::net::TcpListener::bind(addr).await.unwrap_or_else(|e| fail(format!("{addr}: {e}")));
    tracing::info!(%addr, data = %dir, "listening");
    if let Err(e) = axum::serve(listener, app).await {
        fail(e.to_string());
    }
}

fn fail(message: String) -> ! {
    tracing::error!("{message}");
    eprintln!("error: {message}");
    std::process::exit(1)
}
