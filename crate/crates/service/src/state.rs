use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use serde::Serialize;
use tokio::sync::Mutex as PageLock;

use doclabeler::{load_project, save_project, LabelSchema, Page, Project, Result};

use crate::error::{ApiError, ErrorBody};

pub const PROJECTS_DIR: &str = "projects";
pub const EXPORTS_DIR: &str = "exports";

/// A project held in memory. Each page sits behind its own lock, so edits
/// to different pages never contend.
pub struct ProjectHandle {
    pub id: String,
    pub dir: PathBuf,
    pub name: String,
    pub source: String,
    pub schema: LabelSchema,
    pub page_ids: Vec<String>,
    pages: HashMap<String, Arc<PageLock<Page>>>,
    template: Project,
}

impl ProjectHandle {
    fn new(id: String, dir: PathBuf, project: Project) -> Self {
        let page_ids = project.pages.iter().map(|p| p.page_id.clone()).collect();
        let mut template = project;
        let pages = std::mem::take(&mut template.pages)
            .into_iter()
            .map(|p| (p.page_id.clone(), Arc::new(PageLock::new(p))))
            .collect();
        template.root = Some(dir.clone());
        Self {
            id,
            name: template.name.clone(),
            source: template.source.clone(),
            schema: template.schema.clone(),
            dir,
            page_ids,
            pages,
            template,
        }
    }

    pub fn page(&self, page_id: &str) -> Option<Arc<PageLock<Page>>> {
        self.pages.get(page_id).cloned()
    }

    /// Locks every page in order. Locks are always taken in `page_ids`
    /// order, so two callers cannot deadlock.
    pub async fn lock_all(&self) -> Vec<tokio::sync::OwnedMutexGuard<Page>> {
        let mut guards = Vec::with_capacity(self.page_ids.len());
        for id in &self.page_ids {
            guards.push(self.pages[id].clone().lock_owned().await);
        }
        guards
    }

    /// A consistent copy of the whole project.
    pub async fn snapshot(&self) -> Project {
        let guards = self.lock_all().await;
        let mut project = self.template.clone();
        project.pages = guards.iter().map(|g| (**g).clone()).collect();
        project
    }

    pub fn page_key(&self, page_id: &str) -> String {
        format!("{}:{page_id}", self.id)
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum JobStatus {
    Running,
    Done {
        project_id: String,
        pages: usize,
        unknown_labels: BTreeMap<String, usize>,
    },
    Failed {
        error: ErrorBody,
    },
}

pub struct Service {
    home: PathBuf,
    projects: RwLock<BTreeMap<String, Arc<ProjectHandle>>>,
    jobs: Mutex<HashMap<String, JobStatus>>,
    next_project: AtomicU64,
    next_job: AtomicU64,
    next_export: AtomicU64,
}

impl Service {
    /// Opens the service home, loading every project already stored under
    /// `<home>/projects`.
    pub fn open(home: impl Into<PathBuf>) -> Result<Self> {
        let home = home.into();
        let projects_dir = home.join(PROJECTS_DIR);
        std::fs::create_dir_all(&projects_dir).map_err(|e| io_error(&projects_dir, e))?;
        let svc = Self {
            home,
            projects: RwLock::new(BTreeMap::new()),
            jobs: Mutex::new(HashMap::new()),
            next_project: AtomicU64::new(1),
            next_job: AtomicU64::new(1),
            next_export: AtomicU64::new(1),
        };
        let mut dirs: Vec<(u64, PathBuf)> = std::fs::read_dir(&projects_dir)
            .map_err(|e| io_error(&projects_dir, e))?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let name = e.file_name().to_string_lossy().into_owned();
                let n = name.strip_prefix('p')?.parse::<u64>().ok()?;
                Some((n, e.path()))
            })
            .filter(|(_, p)| p.join(doclabeler::store::MANIFEST).is_file())
            .collect();
        dirs.sort();
        for (n, dir) in dirs {
            let project = load_project(&dir)?;
            svc.next_project.fetch_max(n + 1, Ordering::SeqCst);
            svc.insert(format!("p{n}"), dir, project);
        }
        Ok(svc)
    }

    pub fn home(&self) -> &Path {
        &self.home
    }

    fn insert(&self, id: String, dir: PathBuf, project: Project) -> Arc<ProjectHandle> {
        let handle = Arc::new(ProjectHandle::new(id.clone(), dir, project));
        self.projects.write().unwrap().insert(id, handle.clone());
        handle
    }

    /// Copies `project` (and its images) into the service home and registers
    /// it under a fresh id.
    pub fn add_project(&self, project: &Project) -> Result<Arc<ProjectHandle>> {
        let id = format!("p{}", self.next_project.fetch_add(1, Ordering::SeqCst));
        let dir = self.home.join(PROJECTS_DIR).join(&id);
        save_project(project, &dir)?;
        let stored = load_project(&dir)?;
        Ok(self.insert(id, dir, stored))
    }

    pub fn projects(&self) -> Vec<Arc<ProjectHandle>> {
        self.projects.read().unwrap().values().cloned().collect()
    }

    pub fn project(&self, id: &str) -> std::result::Result<Arc<ProjectHandle>, ApiError> {
        self.projects
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("project", id))
    }

    /// Resolves a `<project>:<page>` key.
    pub fn page(&self, key: &str) -> std::result::Result<(Arc<ProjectHandle>, Arc<PageLock<Page>>), ApiError> {
        let (pid, page_id) = key.split_once(':').ok_or_else(|| ApiError::not_found("page", key))?;
        let project = self.project(pid).map_err(|_| ApiError::not_found("page", key))?;
        let page = project.page(page_id).ok_or_else(|| ApiError::not_found("page", key))?;
        Ok((project, page))
    }

    pub fn new_job(&self) -> String {
        let id = format!("j{}", self.next_job.fetch_add(1, Ordering::SeqCst));
        self.jobs.lock().unwrap().insert(id.clone(), JobStatus::Running);
        id
    }

    pub fn finish_job(&self, id: &str, status: JobStatus) {
        self.jobs.lock().unwrap().insert(id.to_string(), status);
    }

    pub fn job(&self, id: &str) -> Option<JobStatus> {
        self.jobs.lock().unwrap().get(id).cloned()
    }

    pub fn export_dir(&self, project_id: &str, kind: &str) -> PathBuf {
        loop {
            let n = self.next_export.fetch_add(1, Ordering::SeqCst);
            let dir = self
                .home
                .join(EXPORTS_DIR)
                .join(format!("{project_id}-{}-{n}", kind.to_ascii_lowercase()));
            if !dir.exists() {
                return dir;
            }
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> doclabeler::Error {
    doclabeler::Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}
