//! HTTP+JSON routes over a [`Store`].

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::net::TcpListener;
use tower_http::services::ServeDir;

use iai_core::votes::write_votes;
use iai_core::waves::parse_cutoff;
use iai_core::{EloConfig, Firm, FirmId};

use crate::error::ServiceError;
use crate::store::{NextPair, Store};

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub default_k: f64,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match self.kind() {
            "not_found" => StatusCode::NOT_FOUND,
            "capacity" => StatusCode::SERVICE_UNAVAILABLE,
            "ordering" => StatusCode::CONFLICT,
            "contract" => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            log::error!("{self}");
        }
        let mut body = json!({ "error": self.kind(), "message": self.to_string() });
        if let ServiceError::Ordering { expected, .. } = &self {
            body["next_index"] = json!(expected);
        }
        (status, Json(body)).into_response()
    }
}

/// Store calls fsync, so they run off the async workers.
async fn blocking<T, F>(state: &AppState, f: F) -> Result<T, ServiceError>
where
    T: Send + 'static,
    F: FnOnce(&Store) -> Result<T, ServiceError> + Send + 'static,
{
    let store = Arc::clone(&state.store);
    tokio::task::spawn_blocking(move || f(&store))
        .await
        .map_err(|e| ServiceError::Persistence(std::io::Error::other(e)))?
}

#[derive(Deserialize)]
struct NewAnalyst {
    certified: bool,
    #[serde(default)]
    state: String,
}

async fn register(State(state): State<AppState>, Json(req): Json<NewAnalyst>) -> Result<Response, ServiceError> {
    let analyst = blocking(&state, move |s| s.register_analyst(req.certified, &req.state)).await?;
    Ok((StatusCode::CREATED, Json(json!({ "analyst_id": analyst.analyst_id }))).into_response())
}

#[derive(Deserialize)]
struct NewSession {
    analyst_id: String,
}

async fn create_session(State(state): State<AppState>, Json(req): Json<NewSession>) -> Result<Response, ServiceError> {
    let session = blocking(&state, move |s| s.create_session(&req.analyst_id)).await?;
    Ok((StatusCode::CREATED, Json(json!({ "session_id": session.session_id }))).into_response())
}

#[derive(Serialize)]
struct FirmCard {
    id: FirmId,
    ticker: String,
    name: String,
}

impl From<Firm> for FirmCard {
    fn from(f: Firm) -> Self {
        FirmCard {
            id: f.id,
            ticker: f.ticker,
            name: f.name,
        }
    }
}

async fn next_pair(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    let next = state.store.next_pair(&id)?;
    Ok(match next {
        NextPair::Pair {
            pair_index,
            firm_a,
            firm_b,
        } => Json(json!({
            "pair_index": pair_index,
            "firm_a": FirmCard::from(firm_a),
            "firm_b": FirmCard::from(firm_b),
        }))
        .into_response(),
        NextPair::Complete => Json(json!({ "complete": true })).into_response(),
    })
}

#[derive(Deserialize)]
struct NewVote {
    pair_index: usize,
    winner: FirmId,
}

async fn vote(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<NewVote>,
) -> Result<Response, ServiceError> {
    let receipt = blocking(&state, move |s| s.submit_vote(&id, req.pair_index, &req.winner)).await?;
    let status = if receipt.replayed {
        StatusCode::OK
    } else {
        StatusCode::CREATED
    };
    Ok((status, Json(json!({ "seq": receipt.event.seq }))).into_response())
}

#[derive(Deserialize)]
struct RatingsQuery {
    k: Option<f64>,
    cutoff: Option<String>,
    #[serde(default)]
    certified_only: bool,
}

#[derive(Serialize)]
struct RatingRow {
    rank: usize,
    firm_id: FirmId,
    ticker: String,
    name: String,
    rating: f64,
}

async fn ratings(State(state): State<AppState>, Query(q): Query<RatingsQuery>) -> Result<Response, ServiceError> {
    let config = EloConfig {
        k_factor: q.k.unwrap_or(state.default_k),
        ..state.store.options().elo
    };
    config.validate()?;
    let cutoff = q.cutoff.as_deref().map(parse_cutoff).transpose()?;
    let store = Arc::clone(&state.store);
    let ranking = blocking(&state, move |s| s.ratings(&config, cutoff, q.certified_only)).await?;
    let rows: Vec<RatingRow> = ranking
        .into_iter()
        .map(|r| {
            let firm = store.universe().get(&r.firm_id);
            RatingRow {
                rank: r.rank,
                ticker: firm.map(|f| f.ticker.clone()).unwrap_or_default(),
                name: firm.map(|f| f.name.clone()).unwrap_or_default(),
                firm_id: r.firm_id,
                rating: r.rating,
            }
        })
        .collect();
    Ok(Json(rows).into_response())
}

async fn export_votes(State(state): State<AppState>) -> Result<Response, ServiceError> {
    let log = state.store.votes();
    let mut buf = Vec::new();
    write_votes(&mut buf, &log)?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], buf).into_response())
}

pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/analysts", post(register))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}/next", get(next_pair))
        .route("/api/sessions/{id}/votes", post(vote))
        .route("/api/ratings", get(ratings))
        .route("/api/export/votes.csv", get(export_votes))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serves until `shutdown` resolves. `on_bind` receives the bound address,
/// which matters when listening on port 0.
pub async fn serve(
    addr: SocketAddr,
    state: AppState,
    static_dir: Option<PathBuf>,
    on_bind: impl FnOnce(SocketAddr),
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr).await?;
    on_bind(listener.local_addr()?);
    axum::serve(listener, router(state, static_dir))
        .with_graceful_shutdown(shutdown)
        .await
}
