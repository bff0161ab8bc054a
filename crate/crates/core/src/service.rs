//! HTTP API under `/api/v1`: datasets, asynchronous solve jobs and their
//! results.
//!
//! | method | path | |
//! |---|---|---|
//! | GET | `/api/v1/datasets` | list datasets |
//! | POST | `/api/v1/datasets` | multipart CSV upload, 201 with `dataset_id` |
//! | POST | `/api/v1/jobs` | `{dataset_id, ...scenario overrides}`, 202 with `job_id` |
//! | GET | `/api/v1/jobs/{id}` | job status |
//! | GET | `/api/v1/jobs/{id}/result` | metrics, transfers and census; 409 until done |
//!
//! Everything lives under the data directory: `datasets/<id>/` holds the
//! uploaded files, `jobs/<id>.json` the job records and `results/<id>/` the
//! result bundle written by [`save_results`].

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use chrono::{NaiveDate, SecondsFormat, Utc};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tokio::sync::Semaphore;
use tower_http::cors::{Any, CorsLayer};

use crate::dataio::{
    load_scenario, prepare_request, read_rows, save_results, CensusRecord, DatasetPaths,
    ResourceTransferRecord, Row, ScenarioConfig, TransferRecord, CENSUS_HEADER, RESOURCE_HEADER,
    TRANSFERS_HEADER,
};
use crate::error::{Error, Result};
use crate::model::SolveRequest;
use crate::pipeline::run_request;
use crate::solver::EmbeddedSolver;

/// Bumped on breaking changes to any response body.
pub const SCHEMA_VERSION: u32 = 1;

/// Files accepted in an upload, by multipart field or file name.
const DATASET_FILES: [&str; 9] = [
    "locations.csv",
    "capacity.csv",
    "census.csv",
    "admissions.csv",
    "nurses.csv",
    "initial.csv",
    "discharges.csv",
    "adjacency.csv",
    "external_supply.csv",
];
const SCENARIO_FILE: &str = "scenario.json";
const META_FILE: &str = "dataset.json";

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    /// Solves running at once; further jobs wait in submission order.
    pub workers: usize,
    pub solve_timeout_secs: f64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            data_dir: PathBuf::from("surgeflow-data"),
            workers: 2,
            solve_timeout_secs: 300.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobState {
    fn is_final(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub job_id: String,
    pub state: JobState,
    pub dataset_id: String,
    /// Scenario fields submitted with the job.
    pub overrides: Value,
    pub progress: String,
    pub error: Option<String>,
    pub submitted_at: String,
    pub started_at: Option<String>,
    pub finished_at: Option<String>,
    /// Solver status of a finished job.
    pub solver_status: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub id: String,
    pub name: String,
    pub locations: usize,
    pub start_date: Option<NaiveDate>,
    pub end_date: Option<NaiveDate>,
    pub files: Vec<String>,
}

struct Inner {
    config: ServiceConfig,
    jobs: Mutex<HashMap<String, JobRecord>>,
    slots: Arc<Semaphore>,
}

/// Shared service state. Cloning is cheap.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

impl AppState {
    /// Opens the data directory. Jobs left queued or running by a previous
    /// process are marked failed; finished jobs keep their results.
    pub fn open(config: ServiceConfig) -> Result<Self> {
        if config.workers == 0 {
            return Err(Error::invalid("`workers` must be at least 1"));
        }
        if !(config.solve_timeout_secs > 0.0) {
            return Err(Error::invalid("`solve_timeout_secs` must be positive"));
        }
        for sub in ["datasets", "jobs", "results"] {
            let d = config.data_dir.join(sub);
            std::fs::create_dir_all(&d).map_err(io_err(&d))?;
        }
        let mut jobs = HashMap::new();
        let dir = config.data_dir.join("jobs");
        for entry in std::fs::read_dir(&dir).map_err(io_err(&dir))? {
            let path = entry.map_err(io_err(&dir))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
            let mut job: JobRecord = match serde_json::from_str(&text) {
                Ok(j) => j,
                Err(e) => {
                    warn!("skipping unreadable job record {}: {e}", path.display());
                    continue;
                }
            };
            if !job.state.is_final() {
                job.state = JobState::Failed;
                job.error = Some("service restarted before the job finished".into());
                job.progress = "failed".into();
                job.finished_at = Some(now());
                write_job(&config.data_dir, &job)?;
            }
            jobs.insert(job.job_id.clone(), job);
        }
        let slots = Arc::new(Semaphore::new(config.workers));
        Ok(AppState {
            inner: Arc::new(Inner {
                config,
                jobs: Mutex::new(jobs),
                slots,
            }),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.inner.config
    }

    fn data_dir(&self) -> &Path {
        &self.inner.config.data_dir
    }

    fn dataset_dir(&self, id: &str) -> PathBuf {
        self.data_dir().join("datasets").join(id)
    }

    fn result_dir(&self, id: &str) -> PathBuf {
        self.data_dir().join("results").join(id)
    }

    /// Applies `f` to a job and persists it, under the registry lock.
    fn update(&self, id: &str, f: impl FnOnce(&mut JobRecord)) {
        let mut jobs = self.inner.jobs.lock().expect("job registry poisoned");
        if let Some(job) = jobs.get_mut(id) {
            f(job);
            if let Err(e) = write_job(self.data_dir(), job) {
                warn!("could not persist job {id}: {e}");
            }
        }
    }

    pub fn job(&self, id: &str) -> Option<JobRecord> {
        self.inner.jobs.lock().expect("job registry poisoned").get(id).cloned()
    }
}

fn write_job(data_dir: &Path, job: &JobRecord) -> Result<()> {
    let path = data_dir.join("jobs").join(format!("{}.json", job.job_id));
    let tmp = path.with_extension("json.tmp");
    let text = serde_json::to_string_pretty(job)?;
    std::fs::write(&tmp, text).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, &path).map_err(io_err(&path))
}

pub fn router(state: AppState) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods(Any)
        .allow_headers(Any);
    Router::new()
        .route("/api/v1/datasets", get(list_datasets).post(upload_dataset))
        .route("/api/v1/jobs", axum::routing::post(submit_job))
        .route("/api/v1/jobs/{id}", get(job_status))
        .route("/api/v1/jobs/{id}/result", get(job_result))
        .fallback(not_found)
        .layer(DefaultBodyLimit::max(64 * 1024 * 1024))
        .layer(cors)
        .with_state(state)
}

/// Serves on `0.0.0.0:port` until interrupted.
pub fn serve(config: ServiceConfig, port: u16) -> Result<()> {
    let state = AppState::open(config)?;
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::io("tokio runtime", e))?;
    rt.block_on(async move {
        let addr = std::net::SocketAddr::from(([0, 0, 0, 0], port));
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| Error::io(format!("0.0.0.0:{port}"), e))?;
        info!("listening on {addr}, data in {}", state.data_dir().display());
        eprintln!("surgeflow service listening on http://{addr}/api/v1");
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| Error::io("http server", e))
    })
}

// responses

fn body(status: StatusCode, mut value: Value) -> Response {
    if let Value::Object(m) = &mut value {
        m.insert("schema_version".into(), json!(SCHEMA_VERSION));
    }
    (status, Json(value)).into_response()
}

/// First backtick-quoted name in a message, the offending field.
fn field_of(message: &str) -> Option<String> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    let name = &message[start..start + len];
    // dotted paths report their last segment
    Some(name.rsplit('.').next().unwrap_or(name).to_string())
}

fn error_body(status: StatusCode, err: &Error) -> Response {
    let message = err.to_string();
    let detail = match err {
        Error::Parse { file, line, column, message } => json!({
            "code": "parse_error",
            "message": format!("{file}:{line}: column `{column}`: {message}"),
            "file": file,
            "line": line,
            "column": column,
        }),
        Error::Solver(_) => json!({"code": "solver_error", "message": message}),
        Error::Io { .. } => json!({"code": "io_error", "message": message}),
        _ => json!({"code": "invalid", "message": message, "field": field_of(&message)}),
    };
    body(status, json!({ "error": detail }))
}

fn simple_error(status: StatusCode, code: &str, message: impl Into<String>) -> Response {
    body(status, json!({"error": {"code": code, "message": message.into()}}))
}

async fn not_found() -> Response {
    simple_error(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

// datasets

fn read_meta(dir: &Path) -> Option<DatasetInfo> {
    let text = std::fs::read_to_string(dir.join(META_FILE)).ok()?;
    serde_json::from_str(&text).ok()
}

async fn list_datasets(State(state): State<AppState>) -> Response {
    let dir = state.data_dir().join("datasets");
    let mut out: Vec<DatasetInfo> = match std::fs::read_dir(&dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .filter_map(|e| read_meta(&e.path()))
            .collect(),
        Err(e) => return error_body(StatusCode::INTERNAL_SERVER_ERROR, &Error::io(&dir, e)),
    };
    out.sort_by(|a, b| a.name.cmp(&b.name).then_with(|| a.id.cmp(&b.id)));
    body(StatusCode::OK, json!({ "datasets": out }))
}

/// Scenario a dataset's jobs start from: its uploaded `scenario.json`, or
/// defaults that accept any number of groups.
fn base_scenario(dir: &Path) -> Result<ScenarioConfig> {
    let path = dir.join(SCENARIO_FILE);
    let mut cfg = if path.is_file() {
        ScenarioConfig::load(&path)?.0
    } else {
        ScenarioConfig {
            group_mode: true,
            ..ScenarioConfig::default()
        }
    };
    cfg.dataset = DatasetPaths::in_dir(dir);
    Ok(cfg)
}

fn canonical_name(field: &str, file_name: Option<&str>) -> Option<&'static str> {
    let candidates = [Some(field), file_name];
    for c in candidates.into_iter().flatten() {
        let c = c.rsplit(['/', '\\']).next().unwrap_or(c);
        for known in DATASET_FILES.iter().chain([&SCENARIO_FILE]) {
            let stem = known.rsplit_once('.').map(|(s, _)| s).unwrap_or(known);
            if c == *known || c == stem {
                return Some(known);
            }
        }
    }
    None
}

fn content_id(files: &BTreeMap<&'static str, Bytes>) -> String {
    let mut h = Sha256::new();
    for (name, data) in files {
        h.update((name.len() as u64).to_le_bytes());
        h.update(name.as_bytes());
        h.update((data.len() as u64).to_le_bytes());
        h.update(data);
    }
    hex::encode(h.finalize())[..16].to_string()
}

/// Checks the files by loading them, then stores them under their content
/// id. Returns the dataset and whether it was new.
fn store_dataset(
    state: &AppState,
    files: BTreeMap<&'static str, Bytes>,
    name: Option<String>,
) -> Result<(DatasetInfo, bool)> {
    let id = content_id(&files);
    let final_dir = state.dataset_dir(&id);
    if let Some(meta) = read_meta(&final_dir) {
        return Ok((meta, false));
    }
    let tmp = state
        .data_dir()
        .join("datasets")
        .join(format!(".upload-{id}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&tmp);
    std::fs::create_dir_all(&tmp).map_err(io_err(&tmp))?;
    let result = (|| {
        for (fname, data) in &files {
            let p = tmp.join(fname);
            std::fs::write(&p, data).map_err(io_err(&p))?;
        }
        let cfg = base_scenario(&tmp)?;
        let inst = load_scenario(&cfg, &tmp)?.instance;
        let name = name
            .filter(|n| !n.trim().is_empty())
            .or_else(|| cfg.name.clone())
            .unwrap_or_else(|| format!("dataset {id}"));
        let info = DatasetInfo {
            id: id.clone(),
            name,
            locations: inst.n_locations(),
            start_date: inst.start_date,
            end_date: inst.date_of(inst.horizon.saturating_sub(1)),
            files: files.keys().map(|s| s.to_string()).collect(),
        };
        let meta = tmp.join(META_FILE);
        std::fs::write(&meta, serde_json::to_string_pretty(&info)?).map_err(io_err(&meta))?;
        Ok(info)
    })();
    match result {
        Ok(info) => {
            if let Err(e) = std::fs::rename(&tmp, &final_dir) {
                // a concurrent upload of the same files got there first
                let _ = std::fs::remove_dir_all(&tmp);
                if read_meta(&final_dir).is_none() {
                    return Err(Error::io(&final_dir, e));
                }
                return Ok((info, false));
            }
            Ok((info, true))
        }
        Err(e) => {
            let _ = std::fs::remove_dir_all(&tmp);
            Err(e)
        }
    }
}

async fn upload_dataset(State(state): State<AppState>, mut multipart: Multipart) -> Response {
    let mut files: BTreeMap<&'static str, Bytes> = BTreeMap::new();
    let mut name = None;
    loop {
        let field = match multipart.next_field().await {
            Ok(Some(f)) => f,
            Ok(None) => break,
            Err(e) => return simple_error(StatusCode::BAD_REQUEST, "bad_multipart", e.to_string()),
        };
        let field_name = field.name().unwrap_or("").to_string();
        let file_name = field.file_name().map(str::to_string);
        if field_name == "name" && file_name.is_none() {
            match field.text().await {
                Ok(t) => name = Some(t),
                Err(e) => return simple_error(StatusCode::BAD_REQUEST, "bad_multipart", e.to_string()),
            }
            continue;
        }
        let Some(canon) = canonical_name(&field_name, file_name.as_deref()) else {
            return simple_error(
                StatusCode::BAD_REQUEST,
                "unknown_file",
                format!("unexpected upload field `{field_name}`"),
            );
        };
        let data = match field.bytes().await {
            Ok(d) => d,
            Err(e) => return simple_error(StatusCode::BAD_REQUEST, "bad_multipart", e.to_string()),
        };
        if files.insert(canon, data).is_some() {
            return simple_error(StatusCode::BAD_REQUEST, "duplicate_file", format!("`{canon}` uploaded twice"));
        }
    }
    let missing: Vec<&str> = ["locations.csv", "capacity.csv"]
        .into_iter()
        .filter(|f| !files.contains_key(f))
        .collect();
    if !missing.is_empty() {
        return simple_error(StatusCode::BAD_REQUEST, "missing_file", format!("upload is missing {}", missing.join(", ")));
    }
    if !files.contains_key("admissions.csv") && !files.contains_key("census.csv") {
        return simple_error(StatusCode::BAD_REQUEST, "missing_file", "upload needs admissions.csv or census.csv");
    }
    let worker = state.clone();
    let stored = tokio::task::spawn_blocking(move || store_dataset(&worker, files, name)).await;
    match stored {
        Ok(Ok((info, created))) => {
            let status = if created { StatusCode::CREATED } else { StatusCode::OK };
            body(status, json!({ "dataset_id": info.id.clone(), "dataset": info }))
        }
        Ok(Err(e @ Error::Io { .. })) => error_body(StatusCode::INTERNAL_SERVER_ERROR, &e),
        Ok(Err(e)) => error_body(StatusCode::BAD_REQUEST, &e),
        Err(e) => simple_error(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()),
    }
}

// jobs

fn job_id_for(dataset_id: &str, overrides: &Value) -> String {
    // serde_json maps are ordered, so equal submissions hash equally
    let mut h = Sha256::new();
    h.update(dataset_id.as_bytes());
    h.update([0]);
    h.update(overrides.to_string().as_bytes());
    format!("job-{}", &hex::encode(h.finalize())[..16])
}

/// Loads the dataset and checks the scenario, returning the request to solve.
fn prepare_job(state: &AppState, dataset_id: &str, overrides: &Value) -> Result<(ScenarioConfig, SolveRequest)> {
    let dir = state.dataset_dir(dataset_id);
    let base = base_scenario(&dir)?;
    let mut cfg = base.with_overrides(overrides)?;
    cfg.dataset = DatasetPaths::in_dir(&dir);
    let limit = state.config().solve_timeout_secs;
    cfg.solver.time_limit_secs = Some(cfg.solver.time_limit_secs.map_or(limit, |t| t.min(limit)));
    let (req, _) = prepare_request(&cfg, &dir)?;
    Ok((cfg, req))
}

async fn submit_job(State(state): State<AppState>, raw: Bytes) -> Response {
    let value: Value = match serde_json::from_slice(&raw) {
        Ok(v) => v,
        Err(e) => return simple_error(StatusCode::BAD_REQUEST, "bad_json", e.to_string()),
    };
    let Value::Object(mut obj) = value else {
        return simple_error(StatusCode::BAD_REQUEST, "bad_json", "body must be a JSON object");
    };
    let dataset_id = match obj.remove("dataset_id") {
        Some(Value::String(s)) => s,
        _ => {
            return body(
                StatusCode::BAD_REQUEST,
                json!({"error": {"code": "invalid", "message": "`dataset_id` is required", "field": "dataset_id"}}),
            )
        }
    };
    if obj.contains_key("dataset") {
        return body(
            StatusCode::BAD_REQUEST,
            json!({"error": {"code": "invalid", "message": "`dataset` cannot be overridden; use `dataset_id`", "field": "dataset"}}),
        );
    }
    let valid_id = !dataset_id.is_empty() && dataset_id.chars().all(|c| c.is_ascii_alphanumeric());
    if !valid_id || read_meta(&state.dataset_dir(&dataset_id)).is_none() {
        return simple_error(StatusCode::NOT_FOUND, "unknown_dataset", format!("no dataset `{dataset_id}`"));
    }
    let overrides = Value::Object(obj);
    let job_id = job_id_for(&dataset_id, &overrides);
    if let Some(existing) = state.job(&job_id) {
        if existing.state != JobState::Failed {
            return body(StatusCode::ACCEPTED, json!({"job_id": job_id, "state": existing.state}));
        }
    }

    let worker = state.clone();
    let (ds, ov) = (dataset_id.clone(), overrides.clone());
    let prepared = tokio::task::spawn_blocking(move || prepare_job(&worker, &ds, &ov)).await;
    let (cfg, req) = match prepared {
        Ok(Ok(p)) => p,
        Ok(Err(e)) => return error_body(StatusCode::BAD_REQUEST, &e),
        Err(e) => return simple_error(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()),
    };

    let record = JobRecord {
        job_id: job_id.clone(),
        state: JobState::Queued,
        dataset_id,
        overrides,
        progress: "queued".into(),
        error: None,
        submitted_at: now(),
        started_at: None,
        finished_at: None,
        solver_status: None,
    };
    {
        let mut jobs = state.inner.jobs.lock().expect("job registry poisoned");
        if let Some(existing) = jobs.get(&job_id) {
            if existing.state != JobState::Failed {
                return body(StatusCode::ACCEPTED, json!({"job_id": job_id, "state": existing.state}));
            }
        }
        if let Err(e) = write_job(state.data_dir(), &record) {
            return error_body(StatusCode::INTERNAL_SERVER_ERROR, &e);
        }
        jobs.insert(job_id.clone(), record);
    }
    let _ = std::fs::remove_dir_all(state.result_dir(&job_id));
    tokio::spawn(run_job(state.clone(), job_id.clone(), cfg, req));
    body(StatusCode::ACCEPTED, json!({"job_id": job_id, "state": JobState::Queued}))
}

async fn run_job(state: AppState, job_id: String, cfg: ScenarioConfig, req: SolveRequest) {
    // the semaphore hands out permits in request order
    let Ok(_permit) = state.inner.slots.clone().acquire_owned().await else {
        return;
    };
    state.update(&job_id, |j| {
        j.state = JobState::Running;
        j.progress = "solving".into();
        j.started_at = Some(now());
    });
    let out_dir = state.result_dir(&job_id);
    let timeout = Duration::from_secs_f64(state.config().solve_timeout_secs + 30.0);
    let task = tokio::task::spawn_blocking(move || -> Result<String> {
        let backend = EmbeddedSolver::new(cfg.solver.clone());
        let (built, outcome) = run_request(&req, &backend, &cfg.metrics)?;
        save_results(&out_dir, &req.instance, &built.model, &outcome)?;
        Ok(outcome.solution.status.to_string())
    });
    let outcome = tokio::time::timeout(timeout, task).await;
    state.update(&job_id, |j| {
        j.finished_at = Some(now());
        match outcome {
            Ok(Ok(Ok(status))) => {
                j.state = JobState::Done;
                j.progress = if status == "optimal" {
                    "done".into()
                } else {
                    format!("done: stopped early with status {status}")
                };
                j.solver_status = Some(status);
            }
            Ok(Ok(Err(e))) => {
                j.state = JobState::Failed;
                j.progress = "failed".into();
                j.error = Some(e.to_string());
            }
            Ok(Err(e)) => {
                j.state = JobState::Failed;
                j.progress = "failed".into();
                j.error = Some(format!("solve panicked: {e}"));
            }
            Err(_) => {
                j.state = JobState::Failed;
                j.progress = "failed".into();
                j.error = Some("solve timed out".into());
            }
        }
    });
    info!("job {job_id} finished");
}

fn status_json(job: &JobRecord) -> Value {
    serde_json::to_value(job).expect("job record serialises")
}

async fn job_status(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Response {
    match state.job(&id) {
        Some(job) => body(StatusCode::OK, status_json(&job)),
        None => simple_error(StatusCode::NOT_FOUND, "unknown_job", format!("no job `{id}`")),
    }
}

/// Result bundle of a finished job, read back from disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobResult {
    pub metrics: Value,
    pub transfers: Vec<TransferRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resource_transfers: Option<Vec<ResourceTransferRecord>>,
    pub census: Vec<CensusRecord>,
    pub baseline_census: Vec<CensusRecord>,
    pub solution: Value,
}

fn rows<T: serde::de::DeserializeOwned>(path: &Path, header: &[&str]) -> Result<Vec<T>> {
    let rows: Vec<Row<T>> = read_rows(path, header)?;
    Ok(rows.into_iter().map(|r| r.value).collect())
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn read_result(dir: &Path) -> Result<JobResult> {
    let res = dir.join("resource_transfers.csv");
    let mut solution = read_json(&dir.join("solution.json"))?;
    // variable values are large and stay on disk
    if let Value::Object(m) = &mut solution {
        m.remove("values");
    }
    Ok(JobResult {
        metrics: read_json(&dir.join("metrics.json"))?,
        transfers: rows(&dir.join("transfers.csv"), &TRANSFERS_HEADER)?,
        resource_transfers: if res.is_file() { Some(rows(&res, &RESOURCE_HEADER)?) } else { None },
        census: rows(&dir.join("census.csv"), &CENSUS_HEADER)?,
        baseline_census: rows(&dir.join("baseline_census.csv"), &CENSUS_HEADER)?,
        solution,
    })
}

async fn job_result(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Response {
    let Some(job) = state.job(&id) else {
        return simple_error(StatusCode::NOT_FOUND, "unknown_job", format!("no job `{id}`"));
    };
    match job.state {
        JobState::Done => {}
        JobState::Failed => {
            return body(
                StatusCode::CONFLICT,
                json!({
                    "job_id": id,
                    "state": job.state,
                    "error": {"code": "job_failed", "message": job.error.unwrap_or_default()},
                }),
            )
        }
        s => {
            return body(
                StatusCode::CONFLICT,
                json!({
                    "job_id": id,
                    "state": s,
                    "error": {"code": "not_finished", "message": format!("job is {}", job.progress)},
                }),
            )
        }
    }
    let dir = state.result_dir(&id);
    match tokio::task::spawn_blocking(move || read_result(&dir)).await {
        Ok(Ok(result)) => {
            let mut v = serde_json::to_value(result).expect("result serialises");
            if let Value::Object(m) = &mut v {
                m.insert("job_id".into(), json!(id));
                m.insert("state".into(), json!(JobState::Done));
            }
            body(StatusCode::OK, v)
        }
        Ok(Err(e)) => error_body(StatusCode::INTERNAL_SERVER_ERROR, &e),
        Err(e) => simple_error(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()),
    }
}
