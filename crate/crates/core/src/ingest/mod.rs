//! PDF ingestion and page image preprocessing.

pub mod image;
pub mod pdf;
pub mod synth;

use std::path::Path;

pub use self::image::{binarize, binarize_otsu, otsu_threshold, otsu_threshold_in, resize_image, GrayImage};
pub use self::pdf::{extract_pdf, Extraction, ExtractionOptions, Granularity};

use crate::error::{Error, Result};
use crate::model::{LabelSchema, Project};
use crate::store::save_project;

/// Extracts `pdf`, writes page images and the project under `dir`.
/// Returns the project and any per-page warnings.
pub fn ingest_pdf(
    pdf: &[u8],
    name: &str,
    schema: LabelSchema,
    options: &ExtractionOptions,
    dir: &Path,
) -> Result<(Project, Vec<String>)> {
    let extraction = extract_pdf(pdf, options)?;
    let mut project = Project::new(name, schema);
    project.source = "pdf".into();
    for ep in extraction.pages {
        let path = dir.join(&ep.page.image_ref);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        ep.image.save(&path).map_err(|e| Error::Image {
            path: path.clone(),
            message: e.to_string(),
        })?;
        project.pages.push(ep.page);
    }
    project.root = Some(dir.to_path_buf());
    save_project(&project, dir)?;
    Ok((project, extraction.warnings))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessOptions {
    pub scale: f64,
    pub binarize: bool,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        Self {
            scale: 1.0,
            binarize: false,
        }
    }
}

/// Resizes (and optionally binarizes) every page image of a stored project
/// in place. Page dimensions and segment quads are rescaled to match the new
/// raster. Returns the updated project, already saved.
pub fn preprocess_project(dir: &Path, options: PreprocessOptions) -> Result<Project> {
    let mut project = crate::store::load_project(dir)?;
    for page in &mut project.pages {
        let path = dir.join(&page.image_ref);
        if !path.exists() {
            return Err(Error::MissingImage(path));
        }
        let img = GrayImage::open(&path)?;
        let mut out = resize_image(&img, options.scale)?;
        if options.binarize {
            out = binarize_otsu(&out)?;
        }
        let sx = f64::from(out.width()) / f64::from(img.width());
        let sy = f64::from(out.height()) / f64::from(img.height());
        let (w, h) = (f64::from(out.width()), f64::from(out.height()));
        for seg in &mut page.segments {
            for p in &mut seg.quad.points {
                p.x = (p.x * sx).clamp(0.0, w);
                p.y = (p.y * sy).clamp(0.0, h);
            }
        }
        page.width = out.width();
        page.height = out.height();
        page.dpi *= sx;
        page.bump_version();
        let png = path.with_extension("png");
        out.save_png(&png)?;
        if png != path {
            page.image_ref = format!("images/{}.png", page.page_id);
        }
    }
    project.modified = chrono::Utc::now();
    save_project(&project, dir)?;
    Ok(project)
}
