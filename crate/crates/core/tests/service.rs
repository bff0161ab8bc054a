use std::path::{Path, PathBuf};
use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use surgeflow::dataio::{load_plan, metrics_json, run_scenario, ScenarioConfig};
use surgeflow::evaluation::compute_metrics_with;
use surgeflow::service::{router, AppState, JobRecord, JobState, ServiceConfig, SCHEMA_VERSION};
use tower::ServiceExt;

const BOUNDARY: &str = "surgeflow-test-boundary";

fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/demo")
}

fn demo_files() -> Vec<(String, Vec<u8>)> {
    ["locations.csv", "capacity.csv", "admissions.csv", "census.csv", "nurses.csv", "scenario.json"]
        .iter()
        .map(|f| (f.to_string(), std::fs::read(demo_dir().join(f)).unwrap()))
        .collect()
}

fn multipart(files: &[(String, Vec<u8>)], name: Option<&str>) -> Vec<u8> {
    let mut body = Vec::new();
    if let Some(n) = name {
        body.extend(format!("--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"name\"\r\n\r\n{n}\r\n").bytes());
    }
    for (fname, data) in files {
        let field = fname.split('.').next().unwrap();
        body.extend(
            format!(
                "--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"{field}\"; filename=\"{fname}\"\r\n\
                 Content-Type: text/csv\r\n\r\n"
            )
            .bytes(),
        );
        body.extend(data);
        body.extend(b"\r\n");
    }
    body.extend(format!("--{BOUNDARY}--\r\n").bytes());
    body
}

struct Api {
    app: Router,
    state: AppState,
    _tmp: Option<tempfile::TempDir>,
}

impl Api {
    fn new(workers: usize) -> Self {
        let tmp = tempfile::tempdir().unwrap();
        let mut api = Api::open(tmp.path(), workers);
        api._tmp = Some(tmp);
        api
    }

    fn open(dir: &Path, workers: usize) -> Self {
        let state = AppState::open(ServiceConfig {
            data_dir: dir.to_path_buf(),
            workers,
            ..ServiceConfig::default()
        })
        .unwrap();
        Api { app: router(state.clone()), state, _tmp: None }
    }

    fn data_dir(&self) -> PathBuf {
        self.state.config().data_dir.clone()
    }

    async fn send(&self, req: Request<Body>) -> (StatusCode, Value) {
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let v: Value = serde_json::from_slice(&bytes).unwrap_or_else(|_| {
            panic!("non-JSON body: {}", String::from_utf8_lossy(&bytes))
        });
        assert_eq!(v["schema_version"], json!(SCHEMA_VERSION), "{v}");
        (status, v)
    }

    async fn get(&self, uri: &str) -> (StatusCode, Value) {
        self.send(Request::get(uri).body(Body::empty()).unwrap()).await
    }

    async fn post_json(&self, uri: &str, body: Value) -> (StatusCode, Value) {
        self.send(
            Request::post(uri)
                .header(header::CONTENT_TYPE, "application/json")
                .body(Body::from(body.to_string()))
                .unwrap(),
        )
        .await
    }

    async fn upload(&self, files: &[(String, Vec<u8>)], name: Option<&str>) -> (StatusCode, Value) {
        self.send(
            Request::post("/api/v1/datasets")
                .header(header::CONTENT_TYPE, format!("multipart/form-data; boundary={BOUNDARY}"))
                .body(Body::from(multipart(files, name)))
                .unwrap(),
        )
        .await
    }

    async fn upload_demo(&self) -> String {
        let (status, v) = self.upload(&demo_files(), Some("demo")).await;
        assert!(status == StatusCode::CREATED || status == StatusCode::OK, "{status} {v}");
        v["dataset_id"].as_str().unwrap().to_string()
    }

    async fn wait(&self, job: &str) -> JobRecord {
        let mut last = JobState::Queued;
        for _ in 0..2000 {
            let (status, v) = self.get(&format!("/api/v1/jobs/{job}")).await;
            assert_eq!(status, StatusCode::OK);
            let rec: JobRecord = serde_json::from_value(v).unwrap();
            assert!(rank(rec.state) >= rank(last), "{last:?} -> {:?}", rec.state);
            last = rec.state;
            if matches!(rec.state, JobState::Done | JobState::Failed) {
                return rec;
            }
            tokio::time::sleep(Duration::from_millis(10)).await;
        }
        panic!("job {job} did not finish");
    }
}

fn rank(s: JobState) -> u8 {
    match s {
        JobState::Queued => 0,
        JobState::Running => 1,
        JobState::Done | JobState::Failed => 2,
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn upload_is_content_addressed() {
    let api = Api::new(2);
    let (status, v) = api.upload(&demo_files(), Some("demo")).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    let id = v["dataset_id"].as_str().unwrap().to_string();
    assert_eq!(v["dataset"]["locations"], json!(5));
    assert_eq!(v["dataset"]["start_date"], json!("2020-04-01"));
    assert_eq!(v["dataset"]["end_date"], json!("2020-04-21"));

    let (status, again) = api.upload(&demo_files(), Some("another name")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(again["dataset_id"], json!(id));

    let (status, list) = api.get("/api/v1/datasets").await;
    assert_eq!(status, StatusCode::OK);
    let items = list["datasets"].as_array().unwrap();
    assert_eq!(items.len(), 1);
    assert_eq!(items[0]["id"], json!(id));
    assert_eq!(items[0]["name"], json!("demo"));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn malformed_upload_cites_line() {
    let api = Api::new(2);
    let mut files = demo_files();
    let adm = files.iter_mut().find(|(n, _)| n == "admissions.csv").unwrap();
    let mut text = String::from_utf8(adm.1.clone()).unwrap();
    text = text.replacen("h1,2020-04-03,covid,3", "h1,2020-04-03,covid,three", 1);
    adm.1 = text.into_bytes();
    let (status, v) = api.upload(&files, None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{v}");
    assert_eq!(v["error"]["code"], json!("parse_error"));
    assert_eq!(v["error"]["file"], json!("admissions.csv"));
    assert_eq!(v["error"]["line"], json!(4));
    assert_eq!(v["error"]["column"], json!("admissions"));

    let (status, v) = api.upload(&files[..1], None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["code"], json!("missing_file"));

    let odd = vec![("secrets.txt".to_string(), b"x".to_vec())];
    let (status, _) = api.upload(&odd, None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (_, list) = api.get("/api/v1/datasets").await;
    assert!(list["datasets"].as_array().unwrap().is_empty());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn job_runs_and_matches_cli() {
    let api = Api::new(2);
    let id = api.upload_demo().await;
    let (status, v) = api.post_json("/api/v1/jobs", json!({"dataset_id": id, "preset": "operational"})).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{v}");
    let job = v["job_id"].as_str().unwrap().to_string();

    // an identical submission maps to the same job
    let (status, dup) = api.post_json("/api/v1/jobs", json!({"preset": "operational", "dataset_id": id})).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    assert_eq!(dup["job_id"], json!(job));

    let rec = api.wait(&job).await;
    assert_eq!(rec.state, JobState::Done, "{:?}", rec.error);
    let (status, res) = api.get(&format!("/api/v1/jobs/{job}/result")).await;
    assert_eq!(status, StatusCode::OK);
    for key in ["metrics", "transfers", "census", "baseline_census"] {
        assert!(!res[key].is_null(), "missing {key}");
    }
    assert_eq!(res["census"].as_array().unwrap().len(), 5 * 21);
    let row = &res["transfers"][0];
    for key in ["group", "from", "to", "date", "amount"] {
        assert!(!row[key].is_null(), "transfer row lacks {key}");
    }

    // the library pipeline the CLI uses, on the same scenario
    let (mut cfg, base) = ScenarioConfig::load(&demo_dir().join("scenario.json")).unwrap();
    cfg.preset = Some(surgeflow::model::Preset::Operational);
    let run = run_scenario(&cfg, &base).unwrap();
    let served = std::fs::read_to_string(api.data_dir().join("results").join(&job).join("metrics.json")).unwrap();
    assert_eq!(served, metrics_json(&run.outcome.metrics).unwrap());

    // metrics of the served plan scored independently
    let inst = &run.request.instance;
    let plan = load_plan(&api.data_dir().join("results").join(&job).join("transfers.csv"), inst).unwrap();
    let scored = compute_metrics_with(inst, &plan, &cfg.metrics).unwrap();
    let served_total = res["metrics"]["total_overflow"].as_f64().unwrap();
    assert!((served_total - scored.total_overflow).abs() <= 1e-9);
    let served_moved = res["metrics"]["total_transferred"].as_f64().unwrap();
    assert!((served_moved - scored.total_transferred).abs() <= 1e-9);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn invalid_jobs_are_rejected() {
    let api = Api::new(2);
    let id = api.upload_demo().await;
    let (status, v) = api.post_json("/api/v1/jobs", json!({"dataset_id": id, "robust": {"gamma": 40}})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["field"], json!("gamma"), "{v}");

    let (status, v) = api.post_json("/api/v1/jobs", json!({"dataset_id": id, "gama": 1})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(v["error"]["message"].as_str().unwrap().contains("gama"));

    let (status, v) = api
        .post_json("/api/v1/jobs", json!({"dataset_id": id, "options": {"capacity_buffer": 1.5}}))
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["field"], json!("capacity_buffer"), "{v}");

    let (status, _) = api.post_json("/api/v1/jobs", json!({"dataset_id": "0123456789abcdef"})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = api.post_json("/api/v1/jobs", json!({"dataset_id": "../etc"})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, v) = api.post_json("/api/v1/jobs", json!({"seed": 1})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["field"], json!("dataset_id"));

    let (status, _) = api.get("/api/v1/jobs/job-nope").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = api.get("/api/v1/jobs/job-nope/result").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = api.get("/api/v1/nothing").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn failed_job_result_is_409_with_error() {
    let api = Api::new(2);
    let id = api.upload_demo().await;
    let (status, v) = api
        .post_json("/api/v1/jobs", json!({"dataset_id": id, "solver": {"iteration_limit": 1}}))
        .await;
    assert_eq!(status, StatusCode::ACCEPTED, "{v}");
    let job = v["job_id"].as_str().unwrap().to_string();
    let rec = api.wait(&job).await;
    assert_eq!(rec.state, JobState::Failed);
    let (status, v) = api.get(&format!("/api/v1/jobs/{job}/result")).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["state"], json!("failed"));
    assert!(v["error"]["message"].as_str().unwrap().contains("solver"), "{v}");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn queue_runs_in_order_with_bounded_concurrency() {
    let api = Api::new(1);
    let id = api.upload_demo().await;
    // a slow integer solve holds the only worker
    let slow = json!({"dataset_id": id, "options": {"integer_transfers": true}, "solver": {"time_limit_secs": 1.5}});
    let (_, v) = api.post_json("/api/v1/jobs", slow).await;
    let first = v["job_id"].as_str().unwrap().to_string();
    let mut later = Vec::new();
    for seed in 1..=2 {
        let (status, v) = api.post_json("/api/v1/jobs", json!({"dataset_id": id, "seed": seed})).await;
        assert_eq!(status, StatusCode::ACCEPTED);
        later.push(v["job_id"].as_str().unwrap().to_string());
    }
    let (status, v) = api.get(&format!("/api/v1/jobs/{first}/result")).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["error"]["code"], json!("not_finished"));

    let all: Vec<String> = std::iter::once(first.clone()).chain(later.clone()).collect();
    loop {
        let states: Vec<JobRecord> = all.iter().map(|j| api.state.job(j).unwrap()).collect();
        let running = states.iter().filter(|r| r.state == JobState::Running).count();
        assert!(running <= 1, "two jobs running with one worker");
        if states.iter().all(|r| r.state == JobState::Done) {
            break;
        }
        assert!(states.iter().all(|r| r.state != JobState::Failed), "{states:?}");
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
    let done = |j: &str| api.state.job(j).unwrap().started_at.unwrap();
    assert!(done(&first) <= done(&later[0]) && done(&later[0]) <= done(&later[1]));
    // the time-limited solve still reports its incumbent
    let rec = api.state.job(&first).unwrap();
    assert_eq!(rec.solver_status.as_deref(), Some("iteration_limit"));
    let (status, _) = api.get(&format!("/api/v1/jobs/{first}/result")).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn restart_keeps_results_and_fails_unfinished_jobs() {
    let tmp = tempfile::tempdir().unwrap();
    let job;
    {
        let api = Api::open(tmp.path(), 2);
        let id = api.upload_demo().await;
        let (_, v) = api.post_json("/api/v1/jobs", json!({"dataset_id": id})).await;
        job = v["job_id"].as_str().unwrap().to_string();
        assert_eq!(api.wait(&job).await.state, JobState::Done);
    }
    // a record left behind mid-run by a crashed process
    let orphan = JobRecord {
        job_id: "job-orphan".into(),
        state: JobState::Running,
        dataset_id: "x".into(),
        overrides: json!({}),
        progress: "solving".into(),
        error: None,
        submitted_at: "2026-01-01T00:00:00.000Z".into(),
        started_at: None,
        finished_at: None,
        solver_status: None,
    };
    std::fs::write(
        tmp.path().join("jobs/job-orphan.json"),
        serde_json::to_string(&orphan).unwrap(),
    )
    .unwrap();

    let api = Api::open(tmp.path(), 2);
    let (status, res) = api.get(&format!("/api/v1/jobs/{job}/result")).await;
    assert_eq!(status, StatusCode::OK);
    assert!(res["metrics"]["total_overflow"].is_number());
    let (_, v) = api.get("/api/v1/jobs/job-orphan").await;
    assert_eq!(v["state"], json!("failed"));
    assert!(v["error"].as_str().unwrap().contains("restarted"));
    let (status, _) = api.get("/api/v1/jobs/job-orphan/result").await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (_, list) = api.get("/api/v1/datasets").await;
    assert_eq!(list["datasets"].as_array().unwrap().len(), 1);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn cors_headers_are_present() {
    let api = Api::new(2);
    let resp = api
        .app
        .clone()
        .oneshot(
            Request::get("/api/v1/datasets")
                .header(header::ORIGIN, "http://localhost:5173")
                .body(Body::empty())
                .unwrap(),
        )
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(resp.headers()[header::ACCESS_CONTROL_ALLOW_ORIGIN], "*");
}
