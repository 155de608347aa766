//! HTTP API over one loaded model archive.
//!
//! | route | response |
//! |---|---|
//! | `POST /api/predict` | prediction summary JSON; 400 with `{"param","lo","hi"}` when out of bounds |
//! | `GET /api/field/{id}/{variable}/{t}` | binary frame (`?kind=mean|variance|ci`) |
//! | `GET /api/sensitivity` | `SobolResult` JSON (`?response=angle|thickness`) |
//! | `GET /api/tree` | tree, rules and rule text |
//! | `GET /api/designspace` | parameter bounds |
//! | `GET /api/modes/{k}` | binary frame of mode `k` on the common grid (`?variable=&partition=`) |

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cpodem_core::emulator::{EmulationResult, EmulatorModel, PartitionLabel, Response as ScalarResponse};
use cpodem_core::field::Variable;
use cpodem_core::kriging::confidence_halfwidth;
use cpodem_core::tree::{extract_rules, rules_text};
use lru::LruCache;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::commands::{emulate, response_sensitivity};
use crate::frame::encode_frame;
use crate::summary::{prediction_id, DesignRejection, DesignRequest};

pub struct ServiceOptions {
    pub sobol_n: usize,
    pub seed: u64,
    pub cache: usize,
    pub static_dir: Option<PathBuf>,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        Self { sobol_n: 4096, seed: 0, cache: 32, static_dir: None }
    }
}

struct CachedPrediction {
    body: Bytes,
    result: EmulationResult,
}

pub struct AppState {
    model: EmulatorModel,
    model_hash: String,
    predictions: Mutex<LruCache<String, Arc<CachedPrediction>>>,
    sensitivity: Mutex<HashMap<&'static str, Bytes>>,
    sobol_n: usize,
    seed: u64,
}

impl AppState {
    pub fn new(model: EmulatorModel, model_hash: String, opts: &ServiceOptions) -> Arc<Self> {
        let cap = NonZeroUsize::new(opts.cache.max(1)).expect("positive");
        Arc::new(Self {
            model,
            model_hash,
            predictions: Mutex::new(LruCache::new(cap)),
            sensitivity: Mutex::new(HashMap::new()),
            sobol_n: opts.sobol_n,
            seed: opts.seed,
        })
    }

    pub fn model(&self) -> &EmulatorModel {
        &self.model
    }

    pub fn cached_predictions(&self) -> usize {
        self.predictions.lock().expect("cache lock").len()
    }
}

pub fn router(state: Arc<AppState>, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/predict", post(predict))
        .route("/api/field/{id}/{variable}/{t}", get(field))
        .route("/api/sensitivity", get(sensitivity))
        .route("/api/tree", get(tree))
        .route("/api/designspace", get(design_space))
        .route("/api/modes/{k}", get(mode))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

fn json_bytes(body: Bytes) -> Response {
    ([(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))], body).into_response()
}

fn binary(body: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, HeaderValue::from_static("application/octet-stream"))], body).into_response()
}

fn error(status: StatusCode, msg: impl std::fmt::Display) -> Response {
    (status, Json(json!({ "error": msg.to_string() }))).into_response()
}

fn not_found(msg: impl std::fmt::Display) -> Response {
    error(StatusCode::NOT_FOUND, msg)
}

/// Integral bounds serialize as integers, matching the design-space file.
fn number(v: f64) -> serde_json::Value {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        json!(v as i64)
    } else {
        json!(v)
    }
}

async fn predict(State(st): State<Arc<AppState>>, req: Result<Json<DesignRequest>, JsonRejection>) -> Response {
    let Json(req) = match req {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.body_text()),
    };
    let d = match req.resolve(&st.model.space) {
        Ok(d) => d,
        Err(DesignRejection::OutOfBounds(b)) => {
            let body = json!({ "param": b.param, "lo": number(b.lo), "hi": number(b.hi) });
            return (StatusCode::BAD_REQUEST, Json(body)).into_response();
        }
        Err(e) => return error(StatusCode::BAD_REQUEST, e),
    };
    let id = prediction_id(&st.model_hash, &d);
    if let Some(hit) = st.predictions.lock().expect("cache lock").get(&id) {
        return json_bytes(hit.body.clone());
    }
    let worker = Arc::clone(&st);
    let computed = tokio::task::spawn_blocking(move || emulate(&worker.model, &worker.model_hash, &d)).await;
    match computed {
        Ok(Ok((summary, result))) => {
            let body = Bytes::from(summary.to_json());
            let entry = Arc::new(CachedPrediction { body: body.clone(), result });
            st.predictions.lock().expect("cache lock").put(id, entry);
            json_bytes(body)
        }
        Ok(Err(e)) => error(StatusCode::UNPROCESSABLE_ENTITY, e),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
enum FieldKind {
    #[default]
    Mean,
    Variance,
    Ci,
}

#[derive(Debug, Deserialize)]
struct FieldQuery {
    #[serde(default)]
    kind: FieldKind,
}

async fn field(
    State(st): State<Arc<AppState>>,
    UrlPath((id, variable, t)): UrlPath<(String, String, String)>,
    Query(q): Query<FieldQuery>,
) -> Response {
    let Some(entry) = st.predictions.lock().expect("cache lock").get(&id).cloned() else {
        return not_found(format!("unknown prediction `{id}`"));
    };
    let Ok(var) = variable.parse::<Variable>() else {
        return not_found(format!("unknown variable `{variable}`"));
    };
    let r = &entry.result;
    let steps = r.fields.steps();
    let Some(t) = t.parse::<usize>().ok().filter(|&t| t < steps) else {
        return not_found(format!("time step `{t}` outside 0..{steps}"));
    };
    let grid = &r.fields.grid;
    let n = grid.len();
    let values: Vec<f64> = match (q.kind, r.fields.snapshot(var, t), r.variance.get(&var)) {
        (FieldKind::Mean, Ok(v), _) => v.to_vec(),
        (FieldKind::Variance, Ok(_), Some(v)) => v[t * n..(t + 1) * n].to_vec(),
        (FieldKind::Ci, Ok(_), Some(v)) => {
            v[t * n..(t + 1) * n].iter().map(|&s| confidence_halfwidth(s, st.model.config.ci_level)).collect()
        }
        _ => return not_found(format!("prediction `{id}` has no {var} field")),
    };
    binary(encode_frame(grid.nx(), grid.nr(), &values))
}

#[derive(Debug, Deserialize)]
struct SensitivityQuery {
    response: Option<String>,
}

async fn sensitivity(State(st): State<Arc<AppState>>, Query(q): Query<SensitivityQuery>) -> Response {
    let (key, response) = match q.response.as_deref().unwrap_or("angle") {
        "angle" => ("angle", ScalarResponse::Angle),
        "thickness" => ("thickness", ScalarResponse::Thickness),
        other => return error(StatusCode::BAD_REQUEST, format!("unknown response `{other}`")),
    };
    if let Some(hit) = st.sensitivity.lock().expect("sensitivity lock").get(key) {
        return json_bytes(hit.clone());
    }
    let worker = Arc::clone(&st);
    let computed = tokio::task::spawn_blocking(move || {
        response_sensitivity(response, Some(&worker.model), &worker.model.space, worker.sobol_n, worker.seed)
    })
    .await;
    match computed {
        Ok(Ok(r)) => {
            let body = Bytes::from(serde_json::to_vec(&r).expect("result serializes"));
            // Concurrent first requests compute identical results; keep the first.
            let body = st.sensitivity.lock().expect("sensitivity lock").entry(key).or_insert(body).clone();
            json_bytes(body)
        }
        Ok(Err(e)) => error(StatusCode::UNPROCESSABLE_ENTITY, e),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
    }
}

async fn tree(State(st): State<Arc<AppState>>) -> Response {
    let space = &st.model.space;
    let rules = st.model.tree.as_ref().map(|t| extract_rules(t, space)).unwrap_or_default();
    Json(json!({
        "partitioned": st.model.is_partitioned(),
        "tree": st.model.tree,
        "text": rules_text(&rules),
        "rules": rules,
    }))
    .into_response()
}

#[derive(Serialize)]
struct ParameterView<'a> {
    name: &'a str,
    lo: f64,
    hi: f64,
    unit: &'a str,
}

async fn design_space(State(st): State<Arc<AppState>>) -> Response {
    let params: Vec<ParameterView> = st
        .model
        .space
        .params()
        .iter()
        .map(|p| ParameterView { name: &p.name, lo: p.lo, hi: p.hi, unit: &p.unit })
        .collect();
    Json(json!({ "params": params, "variables": st.model.config.variables, "steps": st.model.steps, "dt": st.model.dt }))
        .into_response()
}

#[derive(Debug, Deserialize)]
struct ModeQuery {
    variable: Option<String>,
    partition: Option<String>,
}

async fn mode(State(st): State<Arc<AppState>>, UrlPath(k): UrlPath<String>, Query(q): Query<ModeQuery>) -> Response {
    let model = &st.model;
    let part = match q.partition.as_deref() {
        None => model.partitions.first(),
        Some(name) => model.partitions.iter().find(|p| p.label.name() == name),
    };
    let Some(part) = part else {
        return not_found(format!("no partition `{}`", q.partition.unwrap_or_default()));
    };
    let var = match q.variable.as_deref() {
        None => model.config.variables.first().copied(),
        Some(v) => v.parse::<Variable>().ok(),
    };
    let Some(vm) = var.and_then(|v| part.variables.get(&v)) else {
        return not_found(format!("partition {} has no variable `{}`", part.label, q.variable.unwrap_or_default()));
    };
    let Some(k) = k.parse::<usize>().ok().filter(|&k| k < vm.basis.k()) else {
        return not_found(format!("mode `{k}` outside 0..{}", vm.basis.k()));
    };
    let grid = &part.common.grid;
    let mut resp = binary(encode_frame(grid.nx(), grid.nr(), &vm.basis.modes[k]));
    let headers = resp.headers_mut();
    let label: &PartitionLabel = &part.label;
    for (name, value) in [
        ("x-cpodem-partition", label.name().to_string()),
        ("x-cpodem-eigenvalue", format!("{:e}", vm.basis.eigenvalues[k])),
        ("x-cpodem-energy-fraction", format!("{}", vm.basis.energy_fraction[k])),
    ] {
        headers.insert(name, HeaderValue::from_str(&value).expect("ascii header"));
    }
    resp
}
