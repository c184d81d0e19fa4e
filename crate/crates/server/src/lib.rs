//! HTTP service exposing scenes, exploration, planning, validation and the
//! annotation workflow.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use groundplan::eval::{
    auto_outcome, render_table, EvalItem, FailureBreakdown, Outcome, Progress, SuccessTable, VoteRecord, VoteStore,
};
use groundplan::experiment::{read_items, EvaluationMode, ExperimentConfig, ITEMS_FILE, VOTES_FILE};
use groundplan::exploration::{plan_poses, CameraPose, CollectionStrategy, StrategyConfig};
use groundplan::grounding::{validate, RuleMode, RuleSet, SynonymTable, ValidationReport};
use groundplan::perception::{aggregate_object_list, detect_views, CameraConfig, DetectorConfig};
use groundplan::plan::{request_plan, Plan, PlanBackend, PromptTemplate};
use groundplan::scene::{ground_truth_object_list, ObjectList, RoomType, Scene, SceneFile};
use groundplan::Error;

pub const ANNOTATOR_HEADER: &str = "x-annotator-id";

/// Everything a request handler needs; cheap to share.
pub struct AppState {
    pub scenes: BTreeMap<String, Scene>,
    pub store: VoteStore,
    pub strategy: CollectionStrategy,
    pub camera: CameraConfig,
    pub detector: DetectorConfig,
    pub backend: Option<Arc<dyn PlanBackend>>,
    pub model: String,
    pub max_tokens: u32,
    pub template: PromptTemplate,
    pub synonyms: SynonymTable,
    pub rules: RuleMode,
    pub evaluation: EvaluationMode,
    pub seed: u64,
}

impl AppState {
    /// Scenes and defaults from `config`; evaluation items from a finished
    /// run in its output directory, if present. A corrupt vote log is an
    /// error.
    pub fn from_config(config: &ExperimentConfig) -> groundplan::Result<Self> {
        let dir = &config.output_dir;
        let items = if dir.join(ITEMS_FILE).is_file() { read_items(dir)? } else { Vec::new() };
        std::fs::create_dir_all(dir).map_err(|e| Error::Config(format!("{}: {e}", dir.display())))?;
        let store = VoteStore::open(dir.join(VOTES_FILE), items)?;
        let backend: Option<Arc<dyn PlanBackend>> = match config.build_backend() {
            Ok(b) => Some(Arc::from(b)),
            Err(e) => {
                log::warn!("planning disabled: {e}");
                None
            }
        };
        Ok(AppState {
            scenes: config.scenes()?.into_iter().map(|s| (s.id.clone(), s)).collect(),
            store,
            strategy: config.strategy()?,
            camera: config.camera,
            detector: config.detector_config()?,
            backend,
            model: config.backend.model.clone(),
            max_tokens: config.backend.max_tokens,
            template: config.template()?,
            synonyms: config.synonyms()?,
            rules: config.rules,
            evaluation: config.evaluation,
            seed: config.master_seed,
        })
    }

    /// Minimal state for tests and embedding: the given scenes and items,
    /// bundled data, default strategy, no backend.
    pub fn new(scenes: Vec<Scene>, items: Vec<EvalItem>, vote_log: &Path) -> groundplan::Result<Self> {
        Ok(AppState {
            scenes: scenes.into_iter().map(|s| (s.id.clone(), s)).collect(),
            store: VoteStore::open(vote_log, items)?,
            strategy: CollectionStrategy::default(),
            camera: CameraConfig::default(),
            detector: DetectorConfig::default(),
            backend: None,
            model: "planner".into(),
            max_tokens: groundplan::plan::DEFAULT_MAX_TOKENS,
            template: PromptTemplate::bundled_inference(),
            synonyms: SynonymTable::bundled(),
            rules: RuleMode::Lenient,
            evaluation: EvaluationMode::HumanVotes,
            seed: 0,
        })
    }
}

/// Error body: `{"code": ..., "message": ...}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status: status.as_u16(),
            code: code.into(),
            message: message.into(),
        }
    }

    fn not_found(what: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", what)
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        let (status, code) = match &e {
            Error::UnknownItem(_) => (StatusCode::NOT_FOUND, "unknown_item"),
            Error::DuplicateVote { .. } => (StatusCode::CONFLICT, "duplicate_vote"),
            Error::ItemComplete(_) => (StatusCode::CONFLICT, "item_complete"),
            Error::InvalidVote(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_vote"),
            Error::Timeout { .. } => (StatusCode::GATEWAY_TIMEOUT, "backend_timeout"),
            Error::Transport { .. } | Error::BackendStatus { .. } | Error::CassetteMiss { .. } => {
                (StatusCode::BAD_GATEWAY, "backend_error")
            }
            Error::EmptyCompletion | Error::PlanParse { .. } => (StatusCode::BAD_GATEWAY, "unparsable_plan"),
            Error::Validation { .. }
            | Error::InvalidStrategy(_)
            | Error::Detector(_)
            | Error::Template(_)
            | Error::KOutOfRange { .. }
            | Error::NoAchievablePoints(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_request"),
            Error::Io { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "storage_error"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        ApiError::new(status, code, msg)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))
}

type Shared = Arc<AppState>;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/api/scenes", get(list_scenes))
        .route("/api/scenes/{id}", get(get_scene))
        .route("/api/explore", post(explore))
        .route("/api/plans", post(plans))
        .route("/api/validate", post(validate_plan))
        .route("/api/annotations/queue", get(queue))
        .route("/api/annotations", post(annotate))
        .route("/api/reports/success", get(success_report))
        .route("/api/reports/failures", get(failure_report))
        .with_state(state)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneSummary {
    pub id: String,
    pub room_type: RoomType,
    pub width: f64,
    pub depth: f64,
    pub obstacle_count: usize,
    pub object_count: usize,
}

async fn list_scenes(State(st): State<Shared>) -> Json<Vec<SceneSummary>> {
    Json(
        st.scenes
            .values()
            .map(|s| SceneSummary {
                id: s.id.clone(),
                room_type: s.room_type,
                width: s.bounds.width(),
                depth: s.bounds.height(),
                obstacle_count: s.obstacles.len(),
                object_count: s.objects.len(),
            })
            .collect(),
    )
}

async fn get_scene(State(st): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<SceneFile>> {
    st.scenes
        .get(&id)
        .map(|s| Json(SceneFile::from(s)))
        .ok_or_else(|| ApiError::not_found(format!("scene {id}")))
}

#[derive(Debug, Clone, Deserialize)]
pub struct ExploreRequest {
    pub scene_id: String,
    #[serde(default)]
    pub strategy: Option<StrategyConfig>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub true_positive_rate: Option<f64>,
    #[serde(default)]
    pub false_positive_rate: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExploreResponse {
    pub scene_id: String,
    pub image_count: usize,
    pub poses: Vec<CameraPose>,
    pub object_list: ObjectList,
}

async fn explore(State(st): State<Shared>, body: Bytes) -> ApiResult<Json<ExploreResponse>> {
    let req: ExploreRequest = parse_body(&body)?;
    let scene = st
        .scenes
        .get(&req.scene_id)
        .ok_or_else(|| ApiError::not_found(format!("scene {}", req.scene_id)))?;
    let strategy = match req.strategy {
        Some(c) => CollectionStrategy::try_from(c)?,
        None => st.strategy,
    };
    let mut det = st.detector.clone();
    det.true_positive_rate = req.true_positive_rate.unwrap_or(det.true_positive_rate);
    det.false_positive_rate = req.false_positive_rate.unwrap_or(det.false_positive_rate);
    let seed = req.seed.unwrap_or(st.seed);
    let poses = plan_poses(scene, &strategy, seed)?;
    let views = detect_views(scene, &poses, &st.camera, &det, seed)?;
    Ok(Json(ExploreResponse {
        scene_id: scene.id.clone(),
        image_count: poses.len(),
        object_list: aggregate_object_list(&views),
        poses,
    }))
}

/// Either an explicit object list or a scene whose ground-truth list is
/// used.
#[derive(Debug, Clone, Deserialize)]
pub struct PlanRequest {
    pub instruction: String,
    #[serde(default)]
    pub object_list: Option<Vec<String>>,
    #[serde(default)]
    pub scene_id: Option<String>,
}

fn resolve_objects(st: &AppState, list: Option<Vec<String>>, scene_id: Option<&str>) -> ApiResult<ObjectList> {
    match (list, scene_id) {
        (Some(names), _) => Ok(ObjectList::from_names(names)),
        (None, Some(id)) => st
            .scenes
            .get(id)
            .map(ground_truth_object_list)
            .ok_or_else(|| ApiError::not_found(format!("scene {id}"))),
        (None, None) => Err(ApiError::bad_request("object_list or scene_id is required")),
    }
}

async fn plans(State(st): State<Shared>, body: Bytes) -> ApiResult<Json<Plan>> {
    let req: PlanRequest = parse_body(&body)?;
    let objects = resolve_objects(&st, req.object_list, req.scene_id.as_deref())?;
    let backend = st.backend.clone().ok_or_else(|| {
        ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "no_backend", "no planning backend configured")
    })?;
    let state = st.clone();
    let plan = tokio::task::spawn_blocking(move || {
        request_plan(
            backend.as_ref(),
            &state.model,
            state.max_tokens,
            &state.template,
            &objects,
            &req.instruction,
        )
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(Json(plan))
}

#[derive(Debug, Clone, Deserialize)]
pub struct ValidateRequest {
    #[serde(default)]
    pub instruction: String,
    pub plan_text: String,
    #[serde(default)]
    pub object_list: Option<Vec<String>>,
    #[serde(default)]
    pub scene_id: Option<String>,
    #[serde(default)]
    pub rules: Option<RuleMode>,
}

async fn validate_plan(State(st): State<Shared>, body: Bytes) -> ApiResult<Json<ValidationReport>> {
    let req: ValidateRequest = parse_body(&body)?;
    let objects = resolve_objects(&st, req.object_list, req.scene_id.as_deref())?;
    let plan = Plan::from_text(&req.instruction, &req.plan_text, "request")?;
    let rules = RuleSet::for_mode(req.rules.unwrap_or(st.rules));
    Ok(Json(validate(&plan, &objects, &st.synonyms, &rules)))
}

/// What an annotator sees for one item. The hint is the automated
/// validator's opinion and never counts as a vote.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueueView {
    pub item_id: String,
    pub room_type: RoomType,
    pub instruction: String,
    pub steps: Vec<String>,
    pub object_list: ObjectList,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auto_hint: Option<Outcome>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueueResponse {
    pub annotator: String,
    pub items: Vec<QueueView>,
    pub progress: Progress,
}

#[derive(Debug, Deserialize)]
struct QueueQuery {
    annotator: Option<String>,
}

fn annotator_from(query: Option<String>, headers: &HeaderMap) -> Option<String> {
    query
        .or_else(|| headers.get(ANNOTATOR_HEADER).and_then(|v| v.to_str().ok()).map(str::to_string))
        .filter(|a| !a.trim().is_empty())
}

async fn queue(State(st): State<Shared>, Query(q): Query<QueueQuery>, headers: HeaderMap) -> ApiResult<Json<QueueResponse>> {
    let annotator = annotator_from(q.annotator, &headers)
        .ok_or_else(|| ApiError::bad_request("annotator is required"))?;
    let items = st
        .store
        .queue(&annotator)
        .into_iter()
        .map(|item| QueueView {
            item_id: item.item_id.clone(),
            room_type: item.room_type,
            instruction: item.instruction.clone(),
            steps: item.plan.steps.iter().map(|s| format!("Step {}. {}", s.index, s.raw)).collect(),
            object_list: item.object_list.clone(),
            auto_hint: auto_outcome(item),
        })
        .collect();
    Ok(Json(QueueResponse {
        annotator,
        items,
        progress: st.store.progress(),
    }))
}

#[derive(Debug, Clone, Deserialize)]
struct VoteBody {
    item_id: String,
    #[serde(default)]
    annotator_id: Option<String>,
    verdict: groundplan::eval::Verdict,
    #[serde(default)]
    failure_type: Option<groundplan::eval::FailureType>,
}

async fn annotate(State(st): State<Shared>, headers: HeaderMap, body: Bytes) -> ApiResult<Response> {
    let v: VoteBody = parse_body(&body)?;
    let annotator = annotator_from(v.annotator_id, &headers)
        .ok_or_else(|| ApiError::bad_request("annotator_id is required"))?;
    let vote = VoteRecord {
        item_id: v.item_id,
        annotator_id: annotator,
        verdict: v.verdict,
        failure_type: v.failure_type,
        timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
    };
    let state = st.clone();
    let ack = tokio::task::spawn_blocking(move || state.store.record_vote(vote))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok((StatusCode::CREATED, Json(ack)).into_response())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuccessReport {
    pub table: SuccessTable,
    pub rendered: String,
    pub progress: Progress,
    pub incomplete: bool,
}

async fn success_report(State(st): State<Shared>) -> Json<SuccessReport> {
    let table = st.store.success_table();
    let progress = st.store.progress();
    Json(SuccessReport {
        rendered: render_table(&[("votes".into(), table.clone())]),
        table,
        incomplete: !progress.is_complete(),
        progress,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FailureReport {
    pub breakdown: Option<FailureBreakdown>,
    pub progress: Progress,
}

async fn failure_report(State(st): State<Shared>) -> Json<FailureReport> {
    Json(FailureReport {
        breakdown: st.store.failure_breakdown().ok(),
        progress: st.store.progress(),
    })
}

/// Serves until `shutdown` resolves, then flushes the vote log.
pub async fn serve<F>(state: Shared, addr: SocketAddr, shutdown: F) -> std::io::Result<()>
where
    F: std::future::Future<Output = ()> + Send + 'static,
{
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state.clone()))
        .with_graceful_shutdown(shutdown)
        .await?;
    state.store.flush().map_err(std::io::Error::other)
}

/// Blocking entry point used by the CLI: serves until Ctrl-C.
pub fn serve_blocking(state: AppState, addr: SocketAddr) -> std::io::Result<()> {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(serve(Arc::new(state), addr, async {
        let _ = tokio::signal::ctrl_c().await;
    }))
}
