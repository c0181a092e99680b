//! HTTP service for the operator console.
//!
//! Sites are loaded once at start-up and never change shape. Operators
//! toggle switch statuses, trigger runs and read results; every change is
//! also pushed on a per-site server-sent event stream.
//!
//! | method | path | |
//! |---|---|---|
//! | GET | `/sites` | site summaries |
//! | GET | `/sites/{id}` | one summary |
//! | GET | `/sites/{id}/topology` | topology document |
//! | POST | `/sites/{id}/switches/{scada_id}/status` | `{"status": "normal" \| "faulted" \| "down"}` |
//! | POST | `/sites/{id}/run` | `{"mode", "profile", "seed"}` |
//! | GET | `/sites/{id}/results?limit=N` | newest first |
//! | GET | `/sites/{id}/events` | event stream |
//! | GET | `/report.csv` | the CSV report |

use std::convert::Infallible;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::{Stream, StreamExt};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::broadcast;
use tokio_stream::wrappers::BroadcastStream;

use crate::fixtures;
use crate::scenario::{append_report, FaultScenario, Mode, RunEvent, ScenarioEngine, ScenarioError, SimulationResult};
use crate::topology::{export_topology, load_topology_file, BreakerState, GridGraph, SwitchKind, TopologyError};
use crate::transport::ProfileName;

const EVENT_BUFFER: usize = 256;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerConfig {
    pub bind: String,
    /// Directory of topology documents (`*.json`). Built-in sites are used
    /// when unset.
    pub topology_dir: Option<PathBuf>,
    pub report: PathBuf,
    pub seed: u64,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            topology_dir: None,
            report: PathBuf::from("flisr_report.csv"),
            seed: 0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error("{0} is not valid: {1}")]
    Env(&'static str, String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

impl ServerConfig {
    /// Read a TOML file (if given) and apply `FLISR_*` environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let base = match path {
            Some(p) => toml::from_str(&std::fs::read_to_string(p)?)?,
            None => Self::default(),
        };
        base.with_overrides(|k| std::env::var(k).ok())
    }

    pub fn with_overrides(mut self, var: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        if let Some(v) = var("FLISR_BIND") {
            self.bind = v;
        }
        if let Some(v) = var("FLISR_TOPOLOGY_DIR") {
            self.topology_dir = Some(v.into());
        }
        if let Some(v) = var("FLISR_REPORT") {
            self.report = v.into();
        }
        if let Some(v) = var("FLISR_SEED") {
            self.seed = v.parse().map_err(|_| ConfigError::Env("FLISR_SEED", v))?;
        }
        Ok(self)
    }

    pub fn load_sites(&self) -> Result<Vec<GridGraph>, ConfigError> {
        let Some(dir) = &self.topology_dir else {
            return Ok(fixtures::all_sites());
        };
        let mut paths: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        Ok(paths.iter().map(load_topology_file).collect::<Result<_, _>>()?)
    }
}

// ---------------------------------------------------------------------------
// State
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwitchStatus {
    #[default]
    Normal,
    Faulted,
    Down,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchSummary {
    pub scada_id: String,
    pub asdu: u32,
    pub kind: SwitchKind,
    pub normally_open: bool,
    pub breaker_state: BreakerState,
    pub customers: u32,
    pub latitude: f64,
    pub longitude: f64,
    pub status: SwitchStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteSummary {
    pub site_id: String,
    pub name: String,
    pub switches: Vec<SwitchSummary>,
}

/// Events pushed on a site's stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum SiteEvent {
    StatusChanged {
        scada_id: String,
        status: SwitchStatus,
    },
    RunStarted {
        mode: Mode,
        profile: ProfileName,
        seed: u64,
        faulted: Vec<String>,
        down: Vec<String>,
    },
    ControlAction {
        scada_id: String,
        operation: String,
        at_ms: f64,
    },
    RunCompleted {
        result: Box<SimulationResult>,
    },
}

impl SiteEvent {
    pub fn name(&self) -> &'static str {
        match self {
            SiteEvent::StatusChanged { .. } => "status-changed",
            SiteEvent::RunStarted { .. } => "run-started",
            SiteEvent::ControlAction { .. } => "control-action",
            SiteEvent::RunCompleted { .. } => "run-completed",
        }
    }
}

struct Site {
    graph: GridGraph,
    /// Non-normal statuses, in the order they were set.
    statuses: Mutex<IndexMap<String, SwitchStatus>>,
    running: AtomicBool,
    results: Mutex<Vec<SimulationResult>>,
    events: broadcast::Sender<SiteEvent>,
}

impl Site {
    fn new(graph: GridGraph) -> Self {
        Self {
            graph,
            statuses: Mutex::default(),
            running: AtomicBool::new(false),
            results: Mutex::default(),
            events: broadcast::channel(EVENT_BUFFER).0,
        }
    }

    fn status_of(&self, scada_id: &str) -> SwitchStatus {
        self.statuses.lock().unwrap().get(scada_id).copied().unwrap_or_default()
    }

    fn summary(&self) -> SiteSummary {
        let statuses = self.statuses.lock().unwrap();
        SiteSummary {
            site_id: self.graph.site_id().to_string(),
            name: self.graph.name().to_string(),
            switches: self
                .graph
                .switches()
                .iter()
                .map(|s| self.switch_summary(s.scada_id.as_str(), statuses.get(&s.scada_id).copied()))
                .collect(),
        }
    }

    fn switch_summary(&self, scada_id: &str, status: Option<SwitchStatus>) -> SwitchSummary {
        let s = self.graph.switch(scada_id).expect("switch exists");
        let node = self.graph.node(&s.node_id).expect("switch node exists");
        SwitchSummary {
            scada_id: s.scada_id.clone(),
            asdu: s.asdu,
            kind: s.kind,
            normally_open: s.normally_open,
            breaker_state: s.breaker_state,
            customers: s.customers,
            latitude: node.latitude,
            longitude: node.longitude,
            status: status.unwrap_or_default(),
        }
    }

    fn publish(&self, event: SiteEvent) {
        // No subscribers is fine.
        let _ = self.events.send(event);
    }
}

struct Inner {
    sites: IndexMap<String, Site>,
    report: PathBuf,
    report_lock: Mutex<()>,
    default_seed: u64,
    engine: ScenarioEngine,
}

/// Shared application state.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(sites: Vec<GridGraph>, report: impl Into<PathBuf>, default_seed: u64) -> Self {
        Self::with_engine(sites, report, default_seed, ScenarioEngine::default())
    }

    pub fn with_engine(
        sites: Vec<GridGraph>,
        report: impl Into<PathBuf>,
        default_seed: u64,
        engine: ScenarioEngine,
    ) -> Self {
        Self(Arc::new(Inner {
            sites: sites
                .into_iter()
                .map(|g| (g.site_id().to_string(), Site::new(g)))
                .collect(),
            report: report.into(),
            report_lock: Mutex::new(()),
            default_seed,
            engine,
        }))
    }

    pub fn from_config(config: &ServerConfig) -> Result<Self, ConfigError> {
        Ok(Self::new(config.load_sites()?, config.report.clone(), config.seed))
    }

    /// Subscribe to a site's events without going through HTTP.
    pub fn subscribe(&self, site_id: &str) -> Option<broadcast::Receiver<SiteEvent>> {
        self.0.sites.get(site_id).map(|s| s.events.subscribe())
    }

    fn site(&self, id: &str) -> Result<&Site, ApiError> {
        self.0
            .sites
            .get(id)
            .ok_or_else(|| ApiError::NotFound(format!("unknown site {id}")))
    }
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    Conflict(String),
    BadRequest(String),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (code, message) = match self {
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, m),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (code, Json(json!({ "error": message }))).into_response()
    }
}

impl From<ScenarioError> for ApiError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::UnknownDevice(_) | ScenarioError::Overlap(_) | ScenarioError::Duplicate(_) => {
                ApiError::BadRequest(e.to_string())
            }
            _ => ApiError::Internal(e.to_string()),
        }
    }
}

// ---------------------------------------------------------------------------
// Handlers
// ---------------------------------------------------------------------------

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sites", get(list_sites))
        .route("/sites/{id}", get(get_site))
        .route("/sites/{id}/topology", get(get_topology))
        .route("/sites/{id}/switches/{scada_id}/status", post(set_status))
        .route("/sites/{id}/run", post(run_case))
        .route("/sites/{id}/results", get(get_results))
        .route("/sites/{id}/events", get(site_events))
        .route("/report.csv", get(get_report))
        .with_state(state)
}

async fn list_sites(State(state): State<AppState>) -> Json<Vec<SiteSummary>> {
    Json(state.0.sites.values().map(Site::summary).collect())
}

async fn get_site(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<SiteSummary>, ApiError> {
    Ok(Json(state.site(&id)?.summary()))
}

async fn get_topology(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let site = state.site(&id)?;
    Ok(([(header::CONTENT_TYPE, "application/json")], export_topology(&site.graph)).into_response())
}

#[derive(Debug, Deserialize)]
struct StatusBody {
    status: SwitchStatus,
}

async fn set_status(
    State(state): State<AppState>,
    UrlPath((id, scada_id)): UrlPath<(String, String)>,
    Json(body): Json<StatusBody>,
) -> Result<Json<SwitchSummary>, ApiError> {
    let site = state.site(&id)?;
    if site.graph.switch(&scada_id).is_none() {
        return Err(ApiError::NotFound(format!("unknown switch {scada_id}")));
    }
    {
        let mut statuses = site.statuses.lock().unwrap();
        // Checked under the status lock so a run cannot start halfway.
        if site.running.load(Ordering::SeqCst) {
            return Err(ApiError::Conflict("a run is in progress".into()));
        }
        statuses.shift_remove(&scada_id);
        if body.status != SwitchStatus::Normal {
            statuses.insert(scada_id.clone(), body.status);
        }
    }
    site.publish(SiteEvent::StatusChanged {
        scada_id: scada_id.clone(),
        status: body.status,
    });
    Ok(Json(site.switch_summary(&scada_id, Some(site.status_of(&scada_id)))))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct RunBody {
    mode: Option<Mode>,
    profile: Option<ProfileName>,
    seed: Option<u64>,
}

struct RunGuard<'a>(&'a AtomicBool);

impl Drop for RunGuard<'_> {
    fn drop(&mut self) {
        self.0.store(false, Ordering::SeqCst);
    }
}

async fn run_case(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Option<Json<RunBody>>,
) -> Result<Json<SimulationResult>, ApiError> {
    let body = body.map(|Json(b)| b).unwrap_or_default();
    let site = state.site(&id)?;

    let scenario = {
        let statuses = site.statuses.lock().unwrap();
        let pick = |want| {
            statuses
                .iter()
                .filter(|(_, s)| **s == want)
                .map(|(id, _)| id.clone())
                .collect::<Vec<_>>()
        };
        let scenario = FaultScenario {
            site: id.clone(),
            faulted: pick(SwitchStatus::Faulted),
            down: pick(SwitchStatus::Down),
            mode: body.mode.unwrap_or_default(),
            network_profile: body.profile.unwrap_or(ProfileName::FourGLte),
            seed: body.seed.unwrap_or(state.0.default_seed),
        };
        if scenario.is_empty() {
            return Err(ApiError::BadRequest("no switch is faulted or down".into()));
        }
        if site.running.swap(true, Ordering::SeqCst) {
            return Err(ApiError::Conflict("a run is in progress".into()));
        }
        scenario
    };

    let worker = state.clone();
    let outcome = tokio::task::spawn_blocking(move || {
        let site = &worker.0.sites[&scenario.site];
        let _guard = RunGuard(&site.running);
        let profile = worker.0.engine.link_profile(&scenario).name;
        site.publish(SiteEvent::RunStarted {
            mode: scenario.mode,
            profile,
            seed: scenario.seed,
            faulted: scenario.faulted.clone(),
            down: scenario.down.clone(),
        });
        let result = worker.0.engine.run_observed(&site.graph, &scenario, |event| {
            if let RunEvent::ControlReceived { action, at_ms } = event {
                site.publish(SiteEvent::ControlAction {
                    scada_id: action.scada_id.clone(),
                    operation: action.to_string(),
                    at_ms: *at_ms,
                });
            }
        })?;
        {
            let _lock = worker.0.report_lock.lock().unwrap();
            append_report(&result, &worker.0.report)?;
        }
        site.results.lock().unwrap().push(result.clone());
        site.statuses.lock().unwrap().clear();
        site.publish(SiteEvent::RunCompleted {
            result: Box::new(result.clone()),
        });
        Ok::<_, ScenarioError>(result)
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))?;

    Ok(Json(outcome?))
}

#[derive(Debug, Deserialize)]
struct ResultsQuery {
    limit: Option<usize>,
}

async fn get_results(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<ResultsQuery>,
) -> Result<Json<Vec<SimulationResult>>, ApiError> {
    let site = state.site(&id)?;
    let results = site.results.lock().unwrap();
    let limit = q.limit.unwrap_or(usize::MAX);
    Ok(Json(results.iter().rev().take(limit).cloned().collect()))
}

async fn get_report(State(state): State<AppState>) -> Result<Response, ApiError> {
    let text = {
        let _lock = state.0.report_lock.lock().unwrap();
        match std::fs::read_to_string(&state.0.report) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(ApiError::Internal(e.to_string())),
        }
    };
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], text).into_response())
}

async fn site_events(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let rx = state.site(&id)?.events.subscribe();
    let stream = BroadcastStream::new(rx).filter_map(|item| async move {
        // Lagged receivers skip what they missed.
        let event = item.ok()?;
        Some(Ok(Event::default()
            .event(event.name())
            .json_data(&event)
            .expect("event serializes")))
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

/// Bind and serve until Ctrl-C.
pub async fn serve(config: ServerConfig) -> anyhow::Result<()> {
    let state = AppState::from_config(&config)?;
    let addr: SocketAddr = config.bind.parse()?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
