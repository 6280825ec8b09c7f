//! HTTP routes.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};
use tower_http::cors::{Any, CorsLayer};

use crate::error::ApiError;
use crate::session::{CohortInput, TrialConfig};
use crate::store::Store;

type Shared = Arc<Store>;

/// Builds the router. `origin` restricts CORS to one UI origin; any origin
/// is allowed when it is `None`.
pub fn router(store: Shared, origin: Option<HeaderValue>) -> Router {
    let cors = CorsLayer::new().allow_methods(Any).allow_headers(Any);
    let cors = match origin {
        Some(o) => cors.allow_origin(o),
        None => cors.allow_origin(Any),
    };
    Router::new()
        .route("/trials", post(create))
        .route("/trials/{id}", get(snapshot))
        .route("/trials/{id}/cohorts", post(post_cohort))
        .route("/trials/{id}/whatif", post(whatif))
        .route("/trials/{id}/recommendation", get(recommendation))
        .route("/trials/{id}/posterior", get(posterior))
        .layer(cors)
        .with_state(store)
}

fn parse<T: DeserializeOwned>(body: &[u8], status: fn(String) -> ApiError) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| status(e.to_string()))
}

fn cohort_input(body: &[u8]) -> Result<CohortInput, ApiError> {
    let v: Value = parse(body, ApiError::bad_request)?;
    parse(v.to_string().as_bytes(), ApiError::unprocessable)
}

fn json<T: serde::Serialize>(v: &T) -> Result<Json<Value>, ApiError> {
    serde_json::to_value(v).map(Json).map_err(ApiError::internal)
}

async fn create(State(store): State<Shared>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let config: TrialConfig = parse(&body, ApiError::bad_request)?;
    let s = store.create(config)?;
    Ok((StatusCode::CREATED, json(&s.view()?)?))
}

async fn snapshot(State(store): State<Shared>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    json(&store.get(&id)?.view()?)
}

async fn post_cohort(
    State(store): State<Shared>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let input = cohort_input(&body)?;
    let (step, s) = store.commit(&id, input)?;
    Ok(Json(json!({ "step": step, "fit": s.fit()? })))
}

async fn whatif(State(store): State<Shared>, Path(id): Path<String>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let input = cohort_input(&body)?;
    json(&store.whatif(&id, input)?)
}

async fn recommendation(State(store): State<Shared>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let s = store.get(&id)?;
    let last = s.steps.last();
    Ok(Json(json!({
        "status": s.status,
        "recommendation": s.recommendation,
        "coherence_warning": last.is_some_and(|st| st.coherence_warning),
        "settled": last.is_some_and(|st| st.settled),
        "overridden": last.is_some_and(|st| st.overridden),
    })))
}

async fn posterior(State(store): State<Shared>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let s = store.get(&id)?;
    Ok(Json(json!({ "doses": s.state().grid().doses(), "target": s.state().target(), "fit": s.fit()? })))
}
