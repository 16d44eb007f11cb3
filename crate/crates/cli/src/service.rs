use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ragsearch::index::IndexSnapshot;
use ragsearch::retrieval::ScorerKind;
use ragsearch::scoring::{Bm25Params, CompositeWeights};
use ragsearch::{load, Error};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;

use crate::commands::{
    run_context, run_search, ContextRequest, SearchRequest, DEFAULT_BUDGET, DEFAULT_K,
};

pub const DEFAULT_BIND: &str = "127.0.0.1:7700";

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub index_path: PathBuf,
    pub bind_address: SocketAddr,
    pub default_scorer: ScorerKind,
    pub default_k: usize,
    pub bm25: Bm25Params,
    /// Weights used whenever a request names the `composite` scorer.
    pub composite: CompositeWeights,
}

impl ServiceConfig {
    pub fn new(index_path: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            index_path: index_path.into(),
            bind_address: DEFAULT_BIND.parse().expect("valid default address"),
            default_scorer: ScorerKind::Metric(ragsearch::MetricId::Bm25),
            default_k: DEFAULT_K,
            bm25: Bm25Params::default(),
            composite: CompositeWeights::default(),
        }
    }
}

/// Read-only state shared by every request.
#[derive(Debug, Clone)]
pub struct AppState {
    pub snapshot: Arc<IndexSnapshot>,
    pub config: Arc<ServiceConfig>,
}

impl AppState {
    pub fn new(snapshot: IndexSnapshot, config: ServiceConfig) -> Self {
        AppState {
            snapshot: Arc::new(snapshot),
            config: Arc::new(config),
        }
    }

    /// Loads the index named by `config`.
    pub fn load(config: ServiceConfig) -> ragsearch::Result<Self> {
        let snapshot = load(&config.index_path)?;
        Ok(AppState::new(snapshot, config))
    }

    fn scorer(&self, name: Option<&str>) -> Result<ScorerKind, ApiError> {
        match name {
            None => Ok(self.config.default_scorer.clone()),
            Some(name) => Ok(SearchRequest::scorer_from_name(
                name,
                &self.config.composite,
            )?),
        }
    }

    fn search_request(
        &self,
        query: String,
        k: Option<usize>,
        scorer: Option<&str>,
    ) -> Result<SearchRequest, ApiError> {
        Ok(SearchRequest {
            query,
            k: k.unwrap_or(self.config.default_k),
            scorer: self.scorer(scorer)?,
            bm25: self.config.bm25,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub code: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            code: "invalid_params",
            message: message.into(),
        }
    }
}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        let status = match err {
            Error::EmptyQuery | Error::InvalidParams(_) | Error::Domain(_) => {
                StatusCode::BAD_REQUEST
            }
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError {
            status,
            code: err.code(),
            message: err.to_string(),
        }
    }
}

impl From<QueryRejection> for ApiError {
    fn from(rejection: QueryRejection) -> Self {
        ApiError::bad_request(rejection.body_text())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(rejection: JsonRejection) -> Self {
        ApiError::bad_request(rejection.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            log::error!("{}: {}", self.code, self.message);
        }
        let body = ErrorBody {
            error: ErrorDetail {
                code: self.code.to_owned(),
                message: self.message,
            },
        };
        (self.status, Json(body)).into_response()
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub n_docs: u32,
}

#[derive(Debug, Deserialize)]
pub struct SearchParams {
    pub q: Option<String>,
    pub k: Option<usize>,
    pub scorer: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ContextBody {
    pub query: String,
    pub k: Option<usize>,
    pub token_budget: Option<u32>,
    pub scorer: Option<String>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/search", get(search))
        .route("/context", post(context))
        .with_state(state)
}

async fn healthz(State(state): State<AppState>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        n_docs: state.snapshot.n_docs(),
    })
}

async fn search(
    State(state): State<AppState>,
    params: Result<Query<SearchParams>, QueryRejection>,
) -> Response {
    let result = (|| {
        let Query(params) = params?;
        let query = params
            .q
            .ok_or_else(|| ApiError::bad_request("missing query parameter q"))?;
        let request = state.search_request(query, params.k, params.scorer.as_deref())?;
        Ok::<_, ApiError>(run_search(&state.snapshot, &request)?)
    })();
    match result {
        Ok(body) => Json(body).into_response(),
        Err(err) => err.into_response(),
    }
}

async fn context(
    State(state): State<AppState>,
    body: Result<Json<ContextBody>, JsonRejection>,
) -> Response {
    let result = (|| {
        let Json(body) = body?;
        let request = ContextRequest {
            search: state.search_request(body.query, body.k, body.scorer.as_deref())?,
            token_budget: body.token_budget.unwrap_or(DEFAULT_BUDGET),
        };
        Ok::<_, ApiError>(run_context(&state.snapshot, &request)?)
    })();
    match result {
        Ok(bundle) => Json(bundle).into_response(),
        Err(err) => err.into_response(),
    }
}

/// Serves `state` on an already bound listener until `shutdown` resolves.
pub async fn serve_on(
    listener: TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

/// Resolves on ctrl-c, or SIGTERM on unix.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut signal) => {
                signal.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = terminate => {}
    }
    log::info!("shutting down");
}
