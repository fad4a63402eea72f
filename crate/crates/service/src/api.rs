use std::io::{Cursor, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{FromRequest, Path as UrlPath, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use doclabeler::autolabel::{self, LabelProposal, LabelerBinding, LabelerKind, Policy};
use doclabeler::formats::{self, FormatKind};
use doclabeler::metrics::{self, EvalReport};
use doclabeler::model::validate_project;
use doclabeler::ops::PageOp;
use doclabeler::{load_project, store, LabelSchema, Page, Project, Split};

use crate::error::ApiError;
use crate::state::{JobStatus, ProjectHandle, Service};

type ApiResult<T> = Result<T, ApiError>;
type Shared = Arc<Service>;

pub fn router(service: Shared) -> Router {
    Router::new()
        .route("/projects", get(list_projects))
        .route("/projects/import", post(import_project))
        .route("/projects/{p}/export", get(export_project).post(export_project))
        .route("/projects/{p}/pages", get(list_pages))
        .route("/projects/{p}/evaluate", post(evaluate))
        .route("/projects/{p}/split", post(split))
        .route("/jobs/{id}", get(job))
        .route("/pages/{id}", get(get_page))
        .route("/pages/{id}/image", get(page_image))
        .route("/pages/{id}/ops", post(page_ops))
        .route("/pages/{id}/autolabel", post(page_autolabel))
        .with_state(service)
}

/// `Json` whose rejections use the shared error body.
pub struct ApiJson<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for ApiJson<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        let Json(v) = Json::<T>::from_request(req, state).await?;
        Ok(ApiJson(v))
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

#[derive(Serialize)]
struct ProjectSummary {
    id: String,
    name: String,
    source: String,
    pages: usize,
}

fn summary(p: &ProjectHandle) -> ProjectSummary {
    ProjectSummary {
        id: p.id.clone(),
        name: p.name.clone(),
        source: p.source.clone(),
        pages: p.page_ids.len(),
    }
}

async fn list_projects(State(svc): State<Shared>) -> Json<Vec<ProjectSummary>> {
    Json(svc.projects().iter().map(|p| summary(p)).collect())
}

#[derive(Serialize)]
struct PageSummary {
    id: String,
    page_id: String,
    version: u64,
    width: u32,
    height: u32,
    split: Split,
    segments: usize,
}

async fn list_pages(State(svc): State<Shared>, UrlPath(p): UrlPath<String>) -> ApiResult<Json<Vec<PageSummary>>> {
    let project = svc.project(&p)?;
    let mut out = Vec::new();
    for page_id in &project.page_ids {
        let lock = project.page(page_id).expect("page index");
        let page = lock.lock().await;
        out.push(PageSummary {
            id: project.page_key(page_id),
            page_id: page_id.clone(),
            version: page.version,
            width: page.width,
            height: page.height,
            split: page.split,
            segments: page.segments.len(),
        });
    }
    Ok(Json(out))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PageView {
    pub id: String,
    pub project_id: String,
    pub page: Page,
}

async fn get_page(State(svc): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<PageView>> {
    let (project, lock) = svc.page(&id)?;
    let page = lock.lock().await.clone();
    Ok(Json(PageView {
        id,
        project_id: project.id.clone(),
        page,
    }))
}

async fn page_image(State(svc): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let (project, lock) = svc.page(&id)?;
    let image_ref = lock.lock().await.image_ref.clone();
    let path = project.dir.join(&image_ref);
    let bytes = match tokio::fs::read(&path).await {
        Ok(b) => b,
        Err(_) => return Err(doclabeler::Error::MissingImage(path).into()),
    };
    let mime = match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("jpg" | "jpeg") => "image/jpeg",
        _ => "image/png",
    };
    Ok((
        [
            (header::CONTENT_TYPE, mime),
            (header::CACHE_CONTROL, "public, max-age=31536000, immutable"),
        ],
        bytes,
    )
        .into_response())
}

/// A versioned mutation of one page.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PageDelta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub page_id: Option<String>,
    pub base_version: u64,
    pub operation: PageOp,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Applied {
    pub version: u64,
    pub page: Page,
}

fn conflict(current: &Page, base: u64) -> ApiError {
    ApiError::new(
        StatusCode::CONFLICT,
        "version_conflict",
        format!("page is at version {}, request was based on {base}", current.version),
    )
    .with_details(json!({ "page": current }))
}

/// Validates and durably stores `next`. The caller holds the page lock.
fn commit(project: &ProjectHandle, slot: &mut Page, next: Page) -> ApiResult<Applied> {
    let mut check = Project::new("", project.schema.clone());
    check.pages.push(next);
    let violations = validate_project(&check);
    if !violations.is_empty() {
        return Err(ApiError::violations(&violations));
    }
    let next = check.pages.pop().expect("one page");
    store::write_page(&project.dir, &next)?;
    *slot = next;
    Ok(Applied {
        version: slot.version,
        page: slot.clone(),
    })
}

async fn page_ops(
    State(svc): State<Shared>,
    UrlPath(id): UrlPath<String>,
    ApiJson(delta): ApiJson<PageDelta>,
) -> ApiResult<Json<Applied>> {
    let (project, lock) = svc.page(&id)?;
    if let Some(pid) = &delta.page_id {
        if *pid != id && project.page_key(pid) != id {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "bad_request",
                format!("delta is for page {pid:?}, not {id:?}"),
            ));
        }
    }
    let mut page = lock.lock().await;
    if page.version != delta.base_version {
        return Err(conflict(&page, delta.base_version));
    }
    let next = delta.operation.apply(&page, &project.schema)?;
    Ok(Json(commit(&project, &mut page, next)?))
}

#[derive(Debug, Deserialize)]
struct AutolabelRequest {
    #[serde(default = "LabelerBinding::heuristic")]
    binding: LabelerBinding,
    #[serde(default)]
    policy: Policy,
    base_version: Option<u64>,
    #[serde(default)]
    dry_run: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AutolabelResponse {
    pub proposals: Vec<LabelProposal>,
    pub dropped: usize,
    pub version: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub page: Option<Page>,
}

async fn page_autolabel(
    State(svc): State<Shared>,
    UrlPath(id): UrlPath<String>,
    ApiJson(req): ApiJson<AutolabelRequest>,
) -> ApiResult<Json<AutolabelResponse>> {
    req.binding.validate()?;
    let (project, lock) = svc.page(&id)?;
    let snapshot = lock.lock().await.clone();
    if let Some(base) = req.base_version {
        if base != snapshot.version {
            return Err(conflict(&snapshot, base));
        }
    }
    let base = snapshot.version;
    let (proposals, dropped) = match req.binding.kind {
        LabelerKind::Heuristic => (autolabel::heuristic_label(&snapshot, &project.schema)?, 0),
        LabelerKind::Remote => {
            let image = project.dir.join(&snapshot.image_ref);
            let binding = req.binding.clone();
            let schema = project.schema.clone();
            let page = snapshot.clone();
            let outcome = blocking(move || {
                let png = std::fs::read(&image).map_err(|_| doclabeler::Error::MissingImage(image.clone()))?;
                Ok(autolabel::remote_label(&page, &png, &binding, &schema)?)
            })
            .await?;
            (outcome.proposals, outcome.dropped)
        }
    };
    if req.dry_run {
        return Ok(Json(AutolabelResponse {
            proposals,
            dropped,
            version: base,
            page: None,
        }));
    }
    let mut page = lock.lock().await;
    if page.version != base {
        return Err(conflict(&page, base));
    }
    let next = autolabel::apply_proposals(&page, &proposals, req.policy)?;
    let applied = commit(&project, &mut page, next)?;
    Ok(Json(AutolabelResponse {
        proposals,
        dropped,
        version: applied.version,
        page: Some(applied.page),
    }))
}

#[derive(Debug, Deserialize)]
struct ImportQuery {
    kind: Option<FormatKind>,
    name: Option<String>,
}

#[derive(Debug, Deserialize)]
struct ImportRequest {
    kind: FormatKind,
    path: PathBuf,
    name: Option<String>,
    schema: Option<LabelSchema>,
}

enum ImportSource {
    Dir(PathBuf),
    Zip(Bytes),
}

/// Starts an import job. The body is either JSON naming a dataset directory
/// on the server or a zip archive of the dataset (`?kind=` required).
async fn import_project(
    State(svc): State<Shared>,
    query: Result<Query<ImportQuery>, axum::extract::rejection::QueryRejection>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let Query(query) = query?;
    let is_zip = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.contains("zip"))
        || body.starts_with(b"PK\x03\x04");
    let (kind, name, schema, source) = if is_zip {
        let kind = query
            .kind
            .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", "zip upload needs ?kind="))?;
        (kind, query.name, None, ImportSource::Zip(body))
    } else {
        let req: ImportRequest = serde_json::from_slice(&body)
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.to_string()))?;
        (
            req.kind,
            req.name.or(query.name),
            req.schema,
            ImportSource::Dir(req.path),
        )
    };
    let schema = schema.unwrap_or_else(LabelSchema::catalog);
    let job = svc.new_job();
    let svc2 = svc.clone();
    let job_id = job.clone();
    tokio::spawn(async move {
        let svc3 = svc2.clone();
        let status = match blocking(move || run_import(&svc3, kind, name, &schema, source)).await {
            Ok(status) => status,
            Err(e) => JobStatus::Failed { error: *e.body },
        };
        svc2.finish_job(&job_id, status);
    });
    Ok((StatusCode::ACCEPTED, Json(json!({ "job": job, "status": "running" }))))
}

fn run_import(
    svc: &Service,
    kind: FormatKind,
    name: Option<String>,
    schema: &LabelSchema,
    source: ImportSource,
) -> ApiResult<JobStatus> {
    let _tmp;
    let root = match source {
        ImportSource::Dir(p) => p,
        ImportSource::Zip(bytes) => {
            let tmp = tempfile::tempdir().map_err(|e| ApiError::internal(e.to_string()))?;
            let mut archive = zip::ZipArchive::new(Cursor::new(bytes))
                .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "bad_input", format!("bad zip: {e}")))?;
            archive
                .extract(tmp.path())
                .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "bad_input", format!("bad zip: {e}")))?;
            let root = dataset_root(tmp.path());
            _tmp = tmp;
            root
        }
    };
    let outcome = formats::import(kind, &root, schema)?;
    let mut project = outcome.project;
    if let Some(name) = name {
        project.name = name;
    }
    let handle = svc.add_project(&project)?;
    Ok(JobStatus::Done {
        project_id: handle.id.clone(),
        pages: handle.page_ids.len(),
        unknown_labels: outcome.unknown_labels,
    })
}

/// Archives often wrap the dataset in one top-level folder.
fn dataset_root(dir: &Path) -> PathBuf {
    let entries: Vec<_> = std::fs::read_dir(dir)
        .map(|rd| rd.filter_map(|e| e.ok()).collect())
        .unwrap_or_default();
    match entries.as_slice() {
        [only] if only.path().is_dir() && !is_layout_dir(&only.file_name().to_string_lossy()) => only.path(),
        _ => dir.to_path_buf(),
    }
}

fn is_layout_dir(name: &str) -> bool {
    matches!(name, "annotations" | "images" | "txt" | "boxes_and_transcripts")
}

async fn job(State(svc): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let status = svc.job(&id).ok_or_else(|| ApiError::not_found("job", &id))?;
    let mut v = serde_json::to_value(status).map_err(|e| ApiError::internal(e.to_string()))?;
    v["job"] = Value::String(id);
    Ok(Json(v))
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    kind: FormatKind,
    #[serde(default = "yes")]
    include_unlabeled: bool,
    archive: Option<String>,
}

fn yes() -> bool {
    true
}

async fn export_project(
    State(svc): State<Shared>,
    UrlPath(p): UrlPath<String>,
    query: Result<Query<ExportQuery>, axum::extract::rejection::QueryRejection>,
) -> ApiResult<Response> {
    let Query(q) = query?;
    let project = svc.project(&p)?;
    let snapshot = project.snapshot().await;
    let dir = svc.export_dir(&p, q.kind.as_str());
    let zip = match q.archive.as_deref() {
        None => false,
        Some("zip") => true,
        Some(other) => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "bad_request",
                format!("unsupported archive {other:?}, expected zip"),
            ))
        }
    };
    let (dir, files, archive) = blocking(move || {
        let files = formats::export(&snapshot, q.kind, &dir, q.include_unlabeled)?;
        let archive = if zip { Some(zip_files(&dir, &files)?) } else { None };
        Ok((dir, files, archive))
    })
    .await?;
    if let Some(bytes) = archive {
        let disposition = format!(
            "attachment; filename=\"{p}-{}.zip\"",
            q.kind.as_str().to_ascii_lowercase()
        );
        return Ok((
            [
                (header::CONTENT_TYPE, "application/zip".to_string()),
                (header::CONTENT_DISPOSITION, disposition),
            ],
            bytes,
        )
            .into_response());
    }
    Ok(Json(json!({ "kind": q.kind, "dir": dir, "files": files })).into_response())
}

fn zip_files(dir: &Path, files: &[PathBuf]) -> ApiResult<Vec<u8>> {
    let mut out = zip::ZipWriter::new(Cursor::new(Vec::new()));
    let options = zip::write::SimpleFileOptions::default().compression_method(zip::CompressionMethod::Deflated);
    let err = |e: zip::result::ZipError| ApiError::internal(e.to_string());
    for f in files {
        let bytes = std::fs::read(dir.join(f)).map_err(|e| doclabeler::Error::Io {
            path: dir.join(f),
            source: e,
        })?;
        let name = f.to_string_lossy().replace('\\', "/");
        out.start_file(name, options).map_err(err)?;
        out.write_all(&bytes).map_err(|e| ApiError::internal(e.to_string()))?;
    }
    Ok(out.finish().map_err(err)?.into_inner())
}

#[derive(Debug, Deserialize)]
struct EvaluateRequest {
    /// Id of an open project.
    predicted: Option<String>,
    /// Directory of a saved project on the server.
    predicted_path: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReportRow {
    #[serde(rename = "type")]
    pub label: String,
    #[serde(rename = "mEP")]
    pub mep: f64,
    #[serde(rename = "mER")]
    pub mer: f64,
    #[serde(rename = "mEF")]
    pub mef: f64,
    #[serde(rename = "mEA")]
    pub mea: f64,
    pub support: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EvaluateResponse {
    pub rows: Vec<ReportRow>,
    pub overall: ReportRow,
    pub csv: String,
}

fn report_row(label: &str, row: &metrics::TypeRow<f64>) -> ReportRow {
    ReportRow {
        label: label.to_string(),
        mep: row.scores.mep,
        mer: row.scores.mer,
        mef: row.scores.mef,
        mea: row.scores.mea,
        support: row.support,
    }
}

async fn evaluate(
    State(svc): State<Shared>,
    UrlPath(p): UrlPath<String>,
    ApiJson(req): ApiJson<EvaluateRequest>,
) -> ApiResult<Json<EvaluateResponse>> {
    let ground = svc.project(&p)?.snapshot().await;
    let predicted = match (req.predicted, req.predicted_path) {
        (Some(id), _) => svc.project(&id)?.snapshot().await,
        (None, Some(path)) => blocking(move || Ok(load_project(&path)?)).await?,
        (None, None) => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "bad_request",
                "body needs \"predicted\" or \"predicted_path\"",
            ))
        }
    };
    let report: EvalReport<f64> = metrics::evaluate_by_type(&ground, &predicted)?;
    Ok(Json(EvaluateResponse {
        rows: report.per_type.iter().map(|(l, r)| report_row(l, r)).collect(),
        overall: report_row("Overall", &report.overall),
        csv: report.to_csv(),
    }))
}

#[derive(Debug, Deserialize)]
struct SplitRequest {
    #[serde(default = "default_ratio")]
    ratio: String,
    #[serde(default)]
    shuffle: bool,
    #[serde(default)]
    seed: u64,
}

fn default_ratio() -> String {
    "4:1".into()
}

async fn split(
    State(svc): State<Shared>,
    UrlPath(p): UrlPath<String>,
    ApiJson(req): ApiJson<SplitRequest>,
) -> ApiResult<Json<Value>> {
    let ratio = metrics::parse_ratio(&req.ratio)?;
    let project = svc.project(&p)?;
    let mut guards = project.lock_all().await;
    let mut pages: Vec<Page> = guards.iter().map(|g| (**g).clone()).collect();
    metrics::split_dataset(&mut pages, ratio, req.shuffle, req.seed)?;
    for (guard, page) in guards.iter_mut().zip(pages) {
        if page.version != guard.version {
            store::write_page(&project.dir, &page)?;
            **guard = page;
        }
    }
    let assignment: serde_json::Map<String, Value> = guards
        .iter()
        .map(|g| (project.page_key(&g.page_id), json!(g.split)))
        .collect();
    let train = guards.iter().filter(|g| g.split == Split::Train).count();
    Ok(Json(json!({
        "train": train,
        "val": guards.len() - train,
        "assignment": assignment,
    })))
}
