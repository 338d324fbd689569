//! Routes and handlers.
//!
//! | route | source |
//! |---|---|
//! | `GET /meta` | index |
//! | `GET /trajectories` | index |
//! | `GET /trajectories/{id}/segments` | index |
//! | `GET /trajectories/{id}/raw?t0&t1` | raw, capped |
//! | `GET /heatmap?cell&bbox` | raw |
//! | `POST /query` | index, raw only for `hybrid_meet` |
//! | `POST /ingest?strict` | writes both |
//!
//! Geometry is GeoJSON in the store's planar units; `/meta` advertises the
//! projection that produced them.

use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};
use trajseg_core::query::QuerySpec;
use trajseg_core::store::{Database, IngestOptions};
use trajseg_core::synth::HeatGrid;
use trajseg_core::{Error, Rect, TrajId};

use crate::config::ServiceConfig;

/// Shared state: one database behind a reader/writer lock. Queries take the
/// read side and run concurrently; ingestion takes the write side, so each
/// query sees the store either before or after a whole upload.
#[derive(Clone)]
pub struct AppState {
    db: Arc<RwLock<Database>>,
    cfg: Arc<ServiceConfig>,
}

impl AppState {
    pub fn new(db: Database, cfg: ServiceConfig) -> Self {
        Self {
            db: Arc::new(RwLock::new(db)),
            cfg: Arc::new(cfg),
        }
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.cfg
    }

    pub fn read(&self) -> RwLockReadGuard<'_, Database> {
        self.db.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write(&self) -> RwLockWriteGuard<'_, Database> {
        self.db.write().unwrap_or_else(|e| e.into_inner())
    }
}

/// JSON error body `{"error": "..."}` with a status code.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::UnknownTrajectory(_) => StatusCode::NOT_FOUND,
            Error::Io(_) | Error::Corrupt(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        Self {
            status,
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

fn bad_query(e: QueryRejection) -> ApiError {
    ApiError::bad_request(e.body_text())
}

type ApiResult<T> = std::result::Result<T, ApiError>;

pub fn router(state: AppState) -> Router {
    let limit = state.cfg.max_body_bytes;
    let cors = cors_layer(&state.cfg.cors_allow);
    let app = Router::new()
        .route("/meta", get(meta))
        .route("/trajectories", get(list_trajectories))
        .route("/trajectories/{id}/segments", get(segments))
        .route("/trajectories/{id}/raw", get(raw_slice))
        .route("/heatmap", get(heatmap))
        .route("/query", post(query))
        .route("/ingest", post(ingest))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state);
    match cors {
        Some(c) => app.layer(c),
        None => app,
    }
}

fn cors_layer(allow: &[String]) -> Option<CorsLayer> {
    if allow.is_empty() {
        return None;
    }
    let origin = if allow.iter().any(|o| o == "*") {
        AllowOrigin::from(Any)
    } else {
        AllowOrigin::list(allow.iter().filter_map(|o| HeaderValue::from_str(o).ok()))
    };
    Some(
        CorsLayer::new()
            .allow_origin(origin)
            .allow_methods([Method::GET, Method::POST])
            .allow_headers(Any),
    )
}

async fn meta(State(st): State<AppState>) -> Json<Value> {
    let db = st.read();
    Json(json!({
        "crs": "planar",
        "projection": db.projection(),
        "params": db.params(),
        "trajectories": db.segments().num_trajectories(),
        "summaries": db.segments().len(),
        "raw_points": db.raw().len(),
        "raw_cap": st.cfg.raw_cap,
    }))
}

fn bbox_json(r: &Rect) -> [f64; 4] {
    [r.min_x, r.min_y, r.max_x, r.max_y]
}

async fn list_trajectories(State(st): State<AppState>) -> Json<Value> {
    let db = st.read();
    let list: Vec<Value> = db
        .segments()
        .iter()
        .map(|(id, segs)| {
            json!({
                "id": id,
                "bbox": db.segments().bounds(id).map(|r| bbox_json(&r)),
                "segments": segs.len(),
                "t_start": segs.first().map(|s| s.t_start),
                "t_end": segs.last().map(|s| s.t_end),
            })
        })
        .collect();
    Json(json!({ "trajectories": list }))
}

async fn segments(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let db = st.read();
    let id = TrajId::from(id);
    let segs = db
        .segments()
        .trajectory(&id)
        .ok_or_else(|| ApiError::from(Error::UnknownTrajectory(id.clone())))?;
    let coords: Vec<[f64; 2]> = segs.iter().map(|s| [s.centroid.x, s.centroid.y]).collect();
    // a LineString needs two positions; a lone summary is a Point
    let geometry = if coords.len() == 1 {
        json!({ "type": "Point", "coordinates": coords[0] })
    } else {
        json!({ "type": "LineString", "coordinates": coords })
    };
    Ok(Json(json!({
        "type": "Feature",
        "id": id,
        "geometry": geometry,
        "properties": {
            "traj_id": id,
            "radius": segs.iter().map(|s| s.radius).collect::<Vec<_>>(),
            "reach": segs.iter().map(|s| s.reach()).collect::<Vec<_>>(),
            "kind": segs.iter().map(|s| s.kind.as_str()).collect::<Vec<_>>(),
            "n_points": segs.iter().map(|s| s.n_points).collect::<Vec<_>>(),
            "t_rep": segs.iter().map(|s| s.t_rep).collect::<Vec<_>>(),
            "t_start": segs.iter().map(|s| s.t_start).collect::<Vec<_>>(),
            "t_end": segs.iter().map(|s| s.t_end).collect::<Vec<_>>(),
        }
    })))
}

#[derive(Debug, Deserialize)]
struct RawParams {
    t0: Option<f64>,
    t1: Option<f64>,
}

async fn raw_slice(
    State(st): State<AppState>,
    Path(id): Path<String>,
    params: Result<Query<RawParams>, QueryRejection>,
) -> ApiResult<Json<Value>> {
    let Query(params) = params.map_err(bad_query)?;
    let db = st.read();
    let id = TrajId::from(id);
    let t0 = params.t0.unwrap_or(f64::NEG_INFINITY);
    let t1 = params.t1.unwrap_or(f64::INFINITY);
    let n = db.raw().count(&id, t0, t1)?;
    if n > st.cfg.raw_cap {
        return Err(ApiError {
            status: StatusCode::PAYLOAD_TOO_LARGE,
            message: format!("raw slice has {n} points, cap is {}; narrow [t0, t1]", st.cfg.raw_cap),
        });
    }
    let pts = db.raw().slice(&id, t0, t1)?;
    Ok(Json(json!({
        "type": "Feature",
        "id": id,
        "geometry": {
            "type": "MultiPoint",
            "coordinates": pts.iter().map(|s| [s.pos.x, s.pos.y]).collect::<Vec<_>>(),
        },
        "properties": {
            "traj_id": id,
            "t": pts.iter().map(|s| s.t).collect::<Vec<_>>(),
            "count": pts.len(),
        }
    })))
}

#[derive(Debug, Deserialize)]
struct HeatParams {
    cell: Option<f64>,
    /// `min_x,min_y,max_x,max_y`
    bbox: Option<String>,
}

fn parse_bbox(s: &str) -> ApiResult<Rect> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| ApiError::bad_request(format!("bbox: expected min_x,min_y,max_x,max_y, got {s:?}")))?;
    if v.len() != 4 {
        return Err(ApiError::bad_request(format!("bbox: expected 4 numbers, got {}", v.len())));
    }
    Ok(Rect::new(v[0], v[1], v[2], v[3])?)
}

async fn heatmap(State(st): State<AppState>, params: Result<Query<HeatParams>, QueryRejection>) -> ApiResult<Json<Value>> {
    let Query(params) = params.map_err(bad_query)?;
    let db = st.read();
    let cell = params.cell.unwrap_or(db.params().min_r / 3.0);
    let bounds = match params.bbox.as_deref() {
        Some(s) => parse_bbox(s)?,
        None => db
            .segments()
            .ids()
            .into_iter()
            .filter_map(|id| db.segments().bounds(id))
            .reduce(|a, b| a.union(&b))
            .ok_or_else(|| ApiError::bad_request("store is empty; pass bbox"))?,
    };
    if !(cell.is_finite() && cell > 0.0) {
        return Err(ApiError::bad_request(format!("cell: must be positive, got {cell}")));
    }
    let cells = (bounds.width() / cell).ceil().max(1.0) * (bounds.height() / cell).ceil().max(1.0);
    if cells > st.cfg.max_heat_cells as f64 {
        return Err(ApiError::bad_request(format!(
            "cell: {cell} gives {cells} cells over the bbox, limit is {}",
            st.cfg.max_heat_cells
        )));
    }
    let mut grid = HeatGrid::new(bounds, cell)?;
    let ids: Vec<TrajId> = db.raw().ids().cloned().collect();
    for id in &ids {
        for s in db.raw().slice(id, f64::NEG_INFINITY, f64::INFINITY)? {
            grid.add(s.pos);
        }
    }
    let total = grid.total();
    let mut v = serde_json::to_value(&grid).map_err(|e| ApiError::bad_request(e.to_string()))?;
    v["total"] = json!(total);
    Ok(Json(v))
}

async fn query(State(st): State<AppState>, body: Bytes) -> ApiResult<Json<Value>> {
    let spec: QuerySpec =
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("query spec: {e}")))?;
    let db = st.read();
    let result = db.query(&spec)?;
    Ok(Json(serde_json::to_value(result).map_err(|e| ApiError::bad_request(e.to_string()))?))
}

#[derive(Debug, Deserialize)]
struct IngestParams {
    #[serde(default)]
    strict: bool,
}

/// Each upload is a batch: open segments are closed when the body ends, so
/// the index reflects everything that was sent. Later uploads may continue
/// a trajectory with newer timestamps.
async fn ingest(
    State(st): State<AppState>,
    params: Result<Query<IngestParams>, QueryRejection>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let Query(params) = params.map_err(bad_query)?;
    let st2 = st.clone();
    let report = tokio::task::spawn_blocking(move || -> ApiResult<_> {
        let mut db = st2.write();
        let projection = db.projection();
        let report = db.ingest_csv(
            &body[..],
            IngestOptions {
                projection,
                strict: params.strict,
                flush_at_end: true,
            },
        )?;
        if st2.cfg.persist {
            db.save(&st2.cfg.data_dir)?;
        }
        Ok(report)
    })
    .await
    .map_err(|e| ApiError {
        status: StatusCode::INTERNAL_SERVER_ERROR,
        message: e.to_string(),
    })??;
    Ok(Json(serde_json::to_value(report).map_err(|e| ApiError::bad_request(e.to_string()))?))
}
