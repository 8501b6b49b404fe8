//! HTTP gateway around a [`ReusePipeline`].
//!
//! - `POST /v1/request` `{"id"?, "text", "reusable"?}` → decision, plan,
//!   response and latency breakdown
//! - `GET /v1/stats` → cumulative decision counts, and confusion counts and
//!   metrics over requests that carried a `reusable` label
//! - `POST /v1/snapshot` `{"path"?}` → persists the cache
//!
//! Backend outages surface as `200` with decision `bypass`; only malformed
//! requests get `400`.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::metrics::{Cell, ConfusionCounts, LatencyBreakdown, Scores};
use crate::plancache::{CacheStats, Decision, ReusePipeline};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RequestBody {
    #[serde(default)]
    id: Option<String>,
    text: String,
    #[serde(default)]
    reusable: Option<bool>,
}

#[derive(Debug, Serialize)]
pub struct RequestReply {
    pub id: String,
    pub decision: String,
    pub reason: Option<String>,
    pub similarity: Option<f64>,
    pub intent: String,
    pub plan: Option<Value>,
    pub response: Option<String>,
    pub latency_breakdown: LatencyBreakdown,
    pub planner_latency_ms: Option<f64>,
    pub entry_id: Option<u64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct DecisionCounts {
    pub hit: u64,
    pub miss: u64,
    pub bypass: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Stats {
    pub requests: u64,
    pub decisions: DecisionCounts,
    pub errors: u64,
    pub cache: CacheStats,
    pub labelled: ConfusionCounts,
    pub metrics: Scores,
}

#[derive(Default)]
struct Counters {
    decisions: DecisionCounts,
    errors: u64,
    labelled: ConfusionCounts,
}

pub struct Gateway {
    pipeline: ReusePipeline,
    snapshot: Option<PathBuf>,
    counters: Mutex<Counters>,
    next_id: AtomicU64,
}

impl Gateway {
    pub fn new(pipeline: ReusePipeline, snapshot: Option<PathBuf>) -> Self {
        Self {
            pipeline,
            snapshot,
            counters: Mutex::new(Counters::default()),
            next_id: AtomicU64::new(0),
        }
    }

    pub fn pipeline(&self) -> &ReusePipeline {
        &self.pipeline
    }

    pub fn stats(&self) -> Stats {
        let c = self.counters.lock();
        let d = c.decisions;
        Stats {
            requests: d.hit + d.miss + d.bypass,
            decisions: d,
            errors: c.errors,
            cache: self.pipeline.cache().stats(),
            labelled: c.labelled,
            metrics: c.labelled.scores(),
        }
    }

    /// Processes one request synchronously.
    pub fn handle(&self, id: Option<String>, text: &str, reusable: Option<bool>) -> Result<RequestReply> {
        let id = id.unwrap_or_else(|| format!("req-{}", self.next_id.fetch_add(1, Ordering::Relaxed)));
        let out = self.pipeline.process(&id, text)?;
        let decision = &out.decided.decision;
        {
            let mut c = self.counters.lock();
            match decision {
                Decision::Hit { .. } => c.decisions.hit += 1,
                Decision::Miss(_) => c.decisions.miss += 1,
                Decision::Bypass(_) => c.decisions.bypass += 1,
            }
            if out.error.is_some() {
                c.errors += 1;
            }
            if let Some(label) = reusable {
                c.labelled.record(Cell::classify(decision.is_hit(), label));
            }
        }
        Ok(RequestReply {
            decision: decision.label().to_string(),
            reason: decision.reason(),
            similarity: decision.similarity(),
            intent: out.decided.intent.category.to_string(),
            plan: out.plan.as_ref().map(|p| serde_json::to_value(p).expect("plans serialize")),
            response: out.response().map(str::to_string),
            latency_breakdown: out.latency,
            planner_latency_ms: out.planner_latency.map(|d| d.as_secs_f64() * 1e3),
            entry_id: match decision {
                Decision::Hit { entry, .. } => Some(entry.id),
                _ => out.admitted,
            },
            error: out.error,
            id,
        })
    }

    pub fn save_snapshot(&self, path: Option<PathBuf>) -> Result<(PathBuf, usize)> {
        let path = path
            .or_else(|| self.snapshot.clone())
            .ok_or_else(|| Error::InvalidInput("no snapshot path given or configured".into()))?;
        let cache = self.pipeline.cache();
        cache.save_snapshot(&path)?;
        Ok((path, cache.len()))
    }
}

fn error_reply(status: StatusCode, msg: impl Into<String>) -> Response {
    (status, Json(json!({ "error": msg.into() }))).into_response()
}

async fn post_request(State(gw): State<Arc<Gateway>>, body: Bytes) -> Response {
    let parsed: RequestBody = match serde_json::from_slice(&body) {
        Ok(b) => b,
        Err(e) => return error_reply(StatusCode::BAD_REQUEST, format!("malformed body: {e}")),
    };
    if parsed.text.trim().is_empty() {
        return error_reply(StatusCode::BAD_REQUEST, "text is empty");
    }
    let result = tokio::task::spawn_blocking(move || gw.handle(parsed.id, &parsed.text, parsed.reusable)).await;
    match result {
        Ok(Ok(reply)) => Json(reply).into_response(),
        Ok(Err(e @ (Error::InvalidInput(_) | Error::InvalidSlots(_)))) => error_reply(StatusCode::BAD_REQUEST, e.to_string()),
        Ok(Err(e)) => error_reply(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        Err(e) => error_reply(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn get_stats(State(gw): State<Arc<Gateway>>) -> Json<Stats> {
    Json(gw.stats())
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SnapshotBody {
    #[serde(default)]
    path: Option<PathBuf>,
}

async fn post_snapshot(State(gw): State<Arc<Gateway>>, body: Bytes) -> Response {
    let parsed: SnapshotBody = if body.iter().all(u8::is_ascii_whitespace) {
        SnapshotBody::default()
    } else {
        match serde_json::from_slice(&body) {
            Ok(b) => b,
            Err(e) => return error_reply(StatusCode::BAD_REQUEST, format!("malformed body: {e}")),
        }
    };
    match tokio::task::spawn_blocking(move || gw.save_snapshot(parsed.path)).await {
        Ok(Ok((path, entries))) => Json(json!({ "path": path, "entries": entries })).into_response(),
        Ok(Err(e @ Error::InvalidInput(_))) => error_reply(StatusCode::BAD_REQUEST, e.to_string()),
        Ok(Err(e)) => error_reply(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        Err(e) => error_reply(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

pub fn router(gateway: Arc<Gateway>) -> Router {
    Router::new()
        .route("/v1/request", post(post_request))
        .route("/v1/stats", get(get_stats))
        .route("/v1/snapshot", post(post_snapshot))
        .with_state(gateway)
}

/// Serves until `shutdown` resolves, then saves the configured snapshot.
pub async fn serve(
    gateway: Arc<Gateway>,
    addr: SocketAddr,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::Config(format!("cannot bind {addr}: {e}")))?;
    tracing::info!(addr = %listener.local_addr().map_err(|e| Error::io("socket", e))?, "gateway listening");
    serve_on(gateway, listener, shutdown).await
}

pub async fn serve_on(
    gateway: Arc<Gateway>,
    listener: tokio::net::TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> Result<()> {
    axum::serve(listener, router(gateway.clone()))
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(|e| Error::io("gateway", e))?;
    if gateway.snapshot.is_some() {
        let gw = gateway.clone();
        let (path, n) = tokio::task::spawn_blocking(move || gw.save_snapshot(None))
            .await
            .map_err(|e| Error::InvalidInput(e.to_string()))??;
        tracing::info!(path = %path.display(), entries = n, "snapshot saved on shutdown");
    }
    Ok(())
}
