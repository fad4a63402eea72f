//! On-disk project layout.
//!
//! ```text
//! project.json           # name, schema, source, page index
//! pages/<page_id>.json   # Page record incl. segments
//! images/<page_id>.png   # rasterized page
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Extra, LabelSchema, Page, Project};

pub const MANIFEST: &str = "project.json";
pub const PAGES_DIR: &str = "pages";

#[derive(Serialize, Deserialize)]
struct Manifest {
    name: String,
    schema: LabelSchema,
    #[serde(default)]
    source: String,
    created: DateTime<Utc>,
    modified: DateTime<Utc>,
    pages: Vec<String>,
    #[serde(flatten)]
    extra: Extra,
}

pub fn page_path(dir: &Path, page_id: &str) -> PathBuf {
    dir.join(PAGES_DIR).join(format!("{page_id}.json"))
}

/// Writes the project under `dir`. Page files are written first and the
/// manifest last; images are copied from the project's current root when it
/// differs from `dir`.
pub fn save_project(project: &Project, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join(PAGES_DIR)).map_err(|e| Error::io(dir, e))?;
    for page in &project.pages {
        write_page(dir, page)?;
        copy_image(project, page, dir)?;
    }
    let manifest = Manifest {
        name: project.name.clone(),
        schema: project.schema.clone(),
        source: project.source.clone(),
        created: project.created,
        modified: project.modified,
        pages: project.pages.iter().map(|p| p.page_id.clone()).collect(),
        extra: project.extra.clone(),
    };
    write_json_atomic(&dir.join(MANIFEST), &manifest)
}

pub fn load_project(dir: &Path) -> Result<Project> {
    let manifest_path = dir.join(MANIFEST);
    let manifest: Manifest = read_json(&manifest_path)?;
    let pages = manifest
        .pages
        .iter()
        .map(|id| read_json::<Page>(&page_path(dir, id)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Project {
        name: manifest.name,
        schema: manifest.schema,
        pages,
        created: manifest.created,
        modified: manifest.modified,
        source: manifest.source,
        extra: manifest.extra,
        root: Some(dir.to_path_buf()),
    })
}

/// Durably replaces one page file (write to a temp file, fsync, rename).
pub fn write_page(dir: &Path, page: &Page) -> Result<()> {
    write_json_atomic(&page_path(dir, &page.page_id), page)
}

fn copy_image(project: &Project, page: &Page, dir: &Path) -> Result<()> {
    let Some(src) = project.image_path(page) else {
        return Ok(());
    };
    let dst = dir.join(&page.image_ref);
    if src == dst {
        return Ok(());
    }
    if !src.exists() {
        log::warn!("page {}: image {} not found, not copied", page.page_id, src.display());
        return Ok(());
    }
    if let Some(parent) = dst.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::copy(&src, &dst).map_err(|e| Error::io(&src, e))?;
    Ok(())
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::json(path, e))
}

pub(crate) fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::json(path, e))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
