//! HTTP/JSON API over one campaign, for the web UI and scripted clients.
//!
//! Reads work on an immutable snapshot. Mutations are serialized through a
//! single writer, applied to a copy, persisted, then published. Models are
//! fitted lazily once per published snapshot.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::CorsLayer;

use crate::acquisition::Strategy;
use crate::campaign::{CampaignState, FittedModels, Measurement, SuggestOptions, Target};
use crate::design_space::ProcessCondition;
use crate::error::Error;
use crate::hitl::ConversionLabel;
use crate::reports;

pub const IDEMPOTENCY_HEADER: &str = "idempotency-key";
const IDEMPOTENCY_CAPACITY: usize = 1024;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status: status.as_u16(),
            code: code.into(),
            message: message.into(),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let (status, code) = match &e {
            Error::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            Error::Conflict(_) => (StatusCode::CONFLICT, "conflict"),
            Error::State(_) | Error::Exhausted => (StatusCode::CONFLICT, "invalid_state"),
            Error::Version { .. } => (StatusCode::CONFLICT, "unsupported_version"),
            Error::InsufficientData(_) => (StatusCode::UNPROCESSABLE_ENTITY, "insufficient_data"),
            Error::Invariant(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invariant_violation"),
            Error::Validation(_)
            | Error::Range { .. }
            | Error::Parameter(_)
            | Error::Parse { .. }
            | Error::Json(_)
            | Error::Csv(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_input"),
            Error::Numerical(_) | Error::Fitting(_) | Error::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

struct Snapshot {
    generation: u64,
    campaign: Arc<CampaignState>,
}

#[derive(Default)]
struct ModelCache {
    generation: u64,
    models: Option<Arc<FittedModels>>,
}

/// Shared server state. Cheap to clone.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    snapshot: RwLock<Snapshot>,
    writer: tokio::sync::Mutex<()>,
    models: Mutex<ModelCache>,
    idempotency: Mutex<HashMap<String, (u16, Value)>>,
    path: Option<PathBuf>,
}

impl AppState {
    /// `path`, when given, receives the campaign after every mutation.
    pub fn new(campaign: CampaignState, path: Option<PathBuf>) -> Self {
        Self {
            inner: Arc::new(Inner {
                snapshot: RwLock::new(Snapshot {
                    generation: 1,
                    campaign: Arc::new(campaign),
                }),
                writer: tokio::sync::Mutex::new(()),
                models: Mutex::new(ModelCache::default()),
                idempotency: Mutex::new(HashMap::new()),
                path,
            }),
        }
    }

    pub fn campaign(&self) -> Arc<CampaignState> {
        self.inner.snapshot.read().unwrap().campaign.clone()
    }

    fn snapshot(&self) -> (u64, Arc<CampaignState>) {
        let s = self.inner.snapshot.read().unwrap();
        (s.generation, s.campaign.clone())
    }

    async fn models(&self) -> ApiResult<(Arc<CampaignState>, Arc<FittedModels>)> {
        let (generation, campaign) = self.snapshot();
        {
            let cache = self.inner.models.lock().unwrap();
            if cache.generation == generation {
                if let Some(m) = &cache.models {
                    return Ok((campaign, m.clone()));
                }
            }
        }
        let c = campaign.clone();
        let models = Arc::new(blocking(move || c.current_models()).await?);
        let mut cache = self.inner.models.lock().unwrap();
        if cache.generation <= generation {
            cache.generation = generation;
            cache.models = Some(models.clone());
        }
        Ok((campaign, models))
    }

    /// Applies `op` to a copy of the campaign; on success persists and
    /// publishes it. A failed operation leaves the campaign untouched.
    async fn mutate<T, F>(&self, op: F) -> ApiResult<T>
    where
        T: Send + 'static,
        F: FnOnce(&mut CampaignState) -> crate::Result<T> + Send + 'static,
    {
        let _guard = self.inner.writer.lock().await;
        let (generation, current) = self.snapshot();
        let path = self.inner.path.clone();
        let (next, out) = blocking(move || {
            let mut next = (*current).clone();
            let out = op(&mut next)?;
            if let Some(p) = &path {
                next.save(p)?;
            }
            Ok((next, out))
        })
        .await?;
        let mut s = self.inner.snapshot.write().unwrap();
        s.generation = generation + 1;
        s.campaign = Arc::new(next);
        Ok(out)
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> crate::Result<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(ApiError::from)
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| {
        ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "invalid_input",
            format!("request body: {e}"),
        )
    })
}

/// Replays a cached response for a repeated idempotency key, otherwise runs
/// the mutation and caches its outcome.
async fn idempotent<F, Fut>(app: &AppState, headers: &HeaderMap, f: F) -> Response
where
    F: FnOnce() -> Fut,
    Fut: std::future::Future<Output = ApiResult<(StatusCode, Value)>>,
{
    let key = headers
        .get(IDEMPOTENCY_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::to_owned);
    if let Some(k) = &key {
        if let Some((status, body)) = app.inner.idempotency.lock().unwrap().get(k).cloned() {
            let status = StatusCode::from_u16(status).unwrap_or(StatusCode::OK);
            return (status, Json(body)).into_response();
        }
    }
    let (status, body) = match f().await {
        Ok(ok) => ok,
        Err(e) => {
            let status = StatusCode::from_u16(e.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
            (status, serde_json::to_value(&e).unwrap())
        }
    };
    if let Some(k) = key {
        let mut cache = app.inner.idempotency.lock().unwrap();
        if cache.len() >= IDEMPOTENCY_CAPACITY {
            cache.clear();
        }
        cache.insert(k, (status.as_u16(), body.clone()));
    }
    (status, Json(body)).into_response()
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("API types serialize")
}

pub fn router(app: AppState) -> Router {
    Router::new()
        .route("/campaign", get(get_campaign))
        .route("/status", get(get_status))
        .route("/observations", get(get_observations).post(post_observation))
        .route("/rounds", get(get_rounds))
        .route("/rounds/next", post(post_next_round))
        .route("/rounds/{k}", get(get_round))
        .route("/scores", post(post_score))
        .route("/pareto", get(get_pareto))
        .route("/hypervolume", get(get_hypervolume))
        .route("/convergence", get(get_convergence))
        .route("/shap", get(get_shap))
        .route("/acq-map", get(get_acq_map))
        .route("/constraint-map", get(get_constraint_map))
        .route("/whatif", post(post_whatif))
        .route("/spec", get(get_spec))
        .layer(CorsLayer::permissive())
        .with_state(app)
}

/// Serves until the process is interrupted.
pub async fn serve(app: AppState, addr: SocketAddr) -> crate::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(app)).await?;
    Ok(())
}

pub fn serve_blocking(campaign: CampaignState, path: Option<PathBuf>, host: &str, port: u16) -> crate::Result<()> {
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| Error::Parameter(format!("bad listen address {host}:{port}: {e}")))?;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(serve(AppState::new(campaign, path), addr))
}

async fn get_campaign(State(app): State<AppState>) -> Json<Value> {
    Json(to_value(&*app.campaign()))
}

async fn get_status(State(app): State<AppState>) -> Json<Value> {
    Json(to_value(&app.campaign().status()))
}

async fn get_observations(State(app): State<AppState>) -> Json<Value> {
    Json(to_value(&app.campaign().observations()))
}

async fn get_rounds(State(app): State<AppState>) -> Json<Value> {
    Json(to_value(&app.campaign().rounds()))
}

async fn get_round(State(app): State<AppState>, Path(k): Path<usize>) -> ApiResult<Json<Value>> {
    let c = app.campaign();
    let round = c.round(k)?;
    let observations: Vec<_> = round
        .suggested
        .iter()
        .map(|id| c.observation(id).cloned())
        .collect::<crate::Result<_>>()?;
    Ok(Json(json!({ "round": round, "observations": observations })))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct NextRoundRequest {
    strategy: Option<Strategy>,
    hitl: Option<bool>,
    q: Option<usize>,
    label: Option<String>,
    concurrent: bool,
}

async fn post_next_round(State(app): State<AppState>, headers: HeaderMap, body: Bytes) -> Response {
    idempotent(&app, &headers, || async {
        let req: NextRoundRequest = if body.is_empty() {
            NextRoundRequest::default()
        } else {
            parse_body(&body)?
        };
        let options = SuggestOptions {
            strategy: req.strategy,
            hitl: req.hitl,
            q: req.q,
            label: req.label,
            concurrent: req.concurrent,
        };
        let record = app.mutate(move |c| c.suggest_round(&options).cloned()).await?;
        Ok((StatusCode::CREATED, to_value(&record)))
    })
    .await
}

/// A label given as a name or a numeric score.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum LabelInput {
    Name(String),
    Score(f64),
}

impl LabelInput {
    fn parse(&self) -> crate::Result<ConversionLabel> {
        match self {
            LabelInput::Name(s) => s.parse(),
            LabelInput::Score(v) => v.to_string().parse(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScoreRequest {
    id: String,
    label: LabelInput,
}

async fn post_score(State(app): State<AppState>, headers: HeaderMap, body: Bytes) -> Response {
    idempotent(&app, &headers, || async {
        let req: ScoreRequest = parse_body(&body)?;
        let label = req.label.parse()?;
        let id = req.id.clone();
        let obs = app
            .mutate(move |c| {
                c.set_score(&id, label)?;
                c.observation(&id).cloned()
            })
            .await?;
        Ok((StatusCode::OK, to_value(&obs)))
    })
    .await
}

/// A measurement given as `{mean, std}` or as text such as `"1.2 ± 0.1"`.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum MeasurementInput {
    Value(Measurement),
    Text(String),
}

impl MeasurementInput {
    fn parse(self) -> crate::Result<Measurement> {
        match self {
            MeasurementInput::Value(m) => Ok(m),
            MeasurementInput::Text(s) => s.parse(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObservationRequest {
    id: String,
    dispersion: Option<MeasurementInput>,
    leakage: Option<MeasurementInput>,
    #[serde(default)]
    unmeasurable: bool,
}

async fn post_observation(State(app): State<AppState>, headers: HeaderMap, body: Bytes) -> Response {
    idempotent(&app, &headers, || async {
        let req: ObservationRequest = parse_body(&body)?;
        let id = req.id.clone();
        let obs = if req.unmeasurable {
            if req.dispersion.is_some() || req.leakage.is_some() {
                return Err(Error::Parameter("an unmeasurable observation cannot carry measurements".into()).into());
            }
            app.mutate(move |c| {
                c.mark_unmeasurable(&id)?;
                c.observation(&id).cloned()
            })
            .await?
        } else {
            let (Some(d), Some(l)) = (req.dispersion, req.leakage) else {
                return Err(Error::Parameter("both dispersion and leakage are required".into()).into());
            };
            let (d, l) = (d.parse()?, l.parse()?);
            app.mutate(move |c| {
                c.set_objectives(&id, d, l)?;
                c.observation(&id).cloned()
            })
            .await?
        };
        Ok((StatusCode::OK, to_value(&obs)))
    })
    .await
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct ParetoQuery {
    measured_only: bool,
}

async fn get_pareto(State(app): State<AppState>, Query(q): Query<ParetoQuery>) -> ApiResult<Json<Value>> {
    let (campaign, models) = if q.measured_only {
        (app.campaign(), None)
    } else {
        match app.models().await {
            Ok((c, m)) => (c, Some(m)),
            Err(e) if e.code == "insufficient_data" => (app.campaign(), None),
            Err(e) => return Err(e),
        }
    };
    let view = blocking(move || reports::pareto_view(&campaign, models.as_deref())).await?;
    Ok(Json(to_value(&view)))
}

async fn get_hypervolume(State(app): State<AppState>) -> Json<Value> {
    Json(to_value(&app.campaign().hypervolume_history()))
}

#[derive(Debug, Default, Deserialize)]
struct RoundQuery {
    round: Option<usize>,
}

async fn get_convergence(State(app): State<AppState>, Query(q): Query<RoundQuery>) -> ApiResult<Json<Value>> {
    let c = app.campaign();
    let round = match q.round {
        Some(r) => r,
        None => c
            .rounds()
            .iter()
            .rev()
            .find(|r| c.model_snapshots().iter().any(|s| s.round == r.index))
            .map(|r| r.index)
            .ok_or_else(|| Error::State("no suggested round to check".into()))?,
    };
    let report = blocking(move || c.check_convergence(round)).await?;
    Ok(Json(to_value(&report)))
}

#[derive(Debug, Deserialize)]
struct ShapQuery {
    target: Option<String>,
}

async fn get_shap(State(app): State<AppState>, Query(q): Query<ShapQuery>) -> ApiResult<Json<Value>> {
    let target: Target = q.target.as_deref().unwrap_or("dispersion").parse()?;
    let (campaign, models) = app.models().await?;
    let (summary, ids) = blocking(move || reports::shap_report(&campaign, &models, target)).await?;
    Ok(Json(json!({ "target": target, "ids": ids, "summary": summary })))
}

#[derive(Debug, Default, Deserialize)]
struct MapQuery {
    pair: Option<String>,
    fixed: Option<String>,
}

impl MapQuery {
    fn resolve(&self, c: &CampaignState) -> crate::Result<((usize, usize), Option<[f64; 3]>)> {
        let pair = reports::parse_pair(c, self.pair.as_deref().unwrap_or("0,1"))?;
        let fixed = self.fixed.as_deref().map(reports::parse_reals::<3>).transpose()?;
        Ok((pair, fixed))
    }
}

async fn get_acq_map(State(app): State<AppState>, Query(q): Query<MapQuery>) -> ApiResult<Json<Value>> {
    let (campaign, models) = app.models().await?;
    let (pair, fixed) = q.resolve(&campaign)?;
    let map = blocking(move || reports::acq_map(&campaign, &models, pair, fixed)).await?;
    Ok(Json(to_value(&map)))
}

async fn get_constraint_map(State(app): State<AppState>, Query(q): Query<MapQuery>) -> ApiResult<Json<Value>> {
    let (campaign, models) = app.models().await?;
    let (pair, fixed) = q.resolve(&campaign)?;
    let map = blocking(move || reports::constraint_map(&campaign, &models, pair, fixed)).await?;
    Ok(Json(to_value(&map)))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WhatIfRequest {
    condition: ProcessCondition,
}

async fn post_whatif(State(app): State<AppState>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: WhatIfRequest = parse_body(&body)?;
    let (campaign, models) = app.models().await?;
    let w = reports::whatif(&campaign, &models, &req.condition)?;
    Ok(Json(to_value(&w)))
}

async fn get_spec() -> Json<Value> {
    Json(openapi())
}

/// OpenAPI description of the routes above.
pub fn openapi() -> Value {
    let error = json!({ "$ref": "#/components/schemas/Error" });
    let errors = |codes: &[&str]| -> Value {
        codes
            .iter()
            .map(|c| {
                (
                    c.to_string(),
                    json!({ "description": "error", "content": { "application/json": { "schema": error } } }),
                )
            })
            .collect::<serde_json::Map<_, _>>()
            .into()
    };
    let op = |summary: &str, codes: &[&str]| -> Value {
        let mut responses = errors(codes);
        responses
            .as_object_mut()
            .unwrap()
            .insert("200".into(), json!({ "description": "success" }));
        json!({ "summary": summary, "responses": responses })
    };
    let map_params = json!([
        { "name": "pair", "in": "query", "schema": { "type": "string" }, "description": "two parameter indices or names, e.g. 0,1" },
        { "name": "fixed", "in": "query", "schema": { "type": "string" }, "description": "values of the other three parameters" }
    ]);
    let mut shap = op("Shapley attributions for a fitted model", &["422"]);
    shap["parameters"] = json!([{ "name": "target", "in": "query", "schema": { "type": "string", "enum": ["dispersion", "leakage", "conversion"] } }]);
    let mut acq = op("Raw and constrained UCB over a parameter sweep", &["422"]);
    acq["parameters"] = map_params.clone();
    let mut cmap = op("Conversion-score posterior and feasibility over a sweep", &["422"]);
    cmap["parameters"] = map_params;
    let mut round = op("One round with its observations", &["404"]);
    round["parameters"] = json!([{ "name": "k", "in": "path", "required": true, "schema": { "type": "integer" } }]);
    let idem = json!([{ "name": "Idempotency-Key", "in": "header", "schema": { "type": "string" } }]);
    let mutation = |summary: &str, codes: &[&str], body: Value| -> Value {
        let mut o = op(summary, codes);
        o["parameters"] = idem.clone();
        o["requestBody"] = json!({ "content": { "application/json": { "schema": body } } });
        o
    };
    json!({
        "openapi": "3.0.3",
        "info": { "title": "hitl-mobo campaign API", "version": env!("CARGO_PKG_VERSION") },
        "paths": {
            "/campaign": { "get": op("Full campaign state", &[]) },
            "/status": { "get": op("Counts and pending work", &[]) },
            "/observations": {
                "get": op("All observations", &[]),
                "post": mutation("Record measurements or mark unmeasurable", &["404", "409", "422"], json!({
                    "type": "object", "required": ["id"],
                    "properties": {
                        "id": { "type": "string" },
                        "dispersion": { "$ref": "#/components/schemas/Measurement" },
                        "leakage": { "$ref": "#/components/schemas/Measurement" },
                        "unmeasurable": { "type": "boolean" }
                    }
                }))
            },
            "/rounds": { "get": op("All rounds", &[]) },
            "/rounds/{k}": { "get": round },
            "/rounds/next": { "post": mutation("Fit models and suggest the next batch", &["409", "422"], json!({
                "type": "object",
                "properties": {
                    "strategy": { "type": "string", "enum": ["EHVI_GREEDY", "PARETO_UCB"] },
                    "hitl": { "type": "boolean" },
                    "q": { "type": "integer", "minimum": 1 },
                    "label": { "type": "string" },
                    "concurrent": { "type": "boolean" }
                }
            })) },
            "/scores": { "post": mutation("Record a conversion score", &["404", "409", "422"], json!({
                "type": "object", "required": ["id", "label"],
                "properties": { "id": { "type": "string" }, "label": { "oneOf": [{ "type": "string" }, { "type": "number" }] } }
            })) },
            "/pareto": { "get": op("Measured points and fronts", &[]) },
            "/hypervolume": { "get": op("Hypervolume after each round", &[]) },
            "/convergence": { "get": op("Measured vs predicted for a round", &["404", "409", "422"]) },
            "/shap": { "get": shap },
            "/acq-map": { "get": acq },
            "/constraint-map": { "get": cmap },
            "/whatif": { "post": {
                "summary": "Predictions at an arbitrary condition",
                "requestBody": { "content": { "application/json": { "schema": {
                    "type": "object", "required": ["condition"],
                    "properties": { "condition": { "type": "array", "items": { "type": "number" }, "minItems": 5, "maxItems": 5 } }
                } } } },
                "responses": errors(&["422"])
            } },
            "/spec": { "get": op("This document", &[]) }
        },
        "components": { "schemas": {
            "Error": { "type": "object", "properties": { "code": { "type": "string" }, "message": { "type": "string" } } },
            "Measurement": { "oneOf": [
                { "type": "object", "properties": { "mean": { "type": "number" }, "std": { "type": "number", "minimum": 0 } } },
                { "type": "string", "example": "1.23 ± 0.05" }
            ] }
        } }
    })
}
