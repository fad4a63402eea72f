//! Import and export of the PICK, DocBank, XFUND and FUNSD dataset layouts.
//!
//! All four layouts use a top-left origin with y pointing down. Exports are
//! deterministic: pages are written in `page_id` order and segments in id
//! order, so the same project always produces byte-identical files.

mod docbank;
mod funsd;
mod pick;
mod xfund;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{LabelSchema, Page, Project, Segment};
use crate::{Quad, Rect};

/// Label written for UNLABELED segments when they are exported.
pub const DEFAULT_LABEL: &str = "other";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FormatKind {
    Pick,
    DocBank,
    Xfund,
    Funsd,
}

impl FormatKind {
    pub const ALL: [FormatKind; 4] = [
        FormatKind::Pick,
        FormatKind::DocBank,
        FormatKind::Xfund,
        FormatKind::Funsd,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FormatKind::Pick => "PICK",
            FormatKind::DocBank => "DOCBANK",
            FormatKind::Xfund => "XFUND",
            FormatKind::Funsd => "FUNSD",
        }
    }

    /// Whether the layout stores only axis-aligned boxes.
    pub fn axis_aligned(&self) -> bool {
        !matches!(self, FormatKind::Pick)
    }
}

impl fmt::Display for FormatKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FormatKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "PICK" => Ok(FormatKind::Pick),
            "DOCBANK" => Ok(FormatKind::DocBank),
            "XFUND" => Ok(FormatKind::Xfund),
            "FUNSD" => Ok(FormatKind::Funsd),
            _ => Err(Error::InvalidArgument(format!(
                "unknown format {s:?}, expected PICK, DOCBANK, XFUND or FUNSD"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportOutcome {
    pub project: Project,
    /// Source labels absent from the schema, with occurrence counts. Their
    /// segments were imported as UNLABELED.
    pub unknown_labels: BTreeMap<String, usize>,
}

/// Reads the dataset under `root`. Image references stay relative to
/// `root`, which becomes the project's image root.
pub fn import(kind: FormatKind, root: &Path, schema: &LabelSchema) -> Result<ImportOutcome> {
    if !root.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found"),
        ));
    }
    let mut labels = LabelMapper::new(schema);
    let mut pages = match kind {
        FormatKind::Pick => pick::import(root, &mut labels)?,
        FormatKind::DocBank => docbank::import(root, &mut labels)?,
        FormatKind::Xfund => xfund::import(root, &mut labels)?,
        FormatKind::Funsd => funsd::import(root, &mut labels)?,
    };
    pages.sort_by(|a, b| a.page_id.cmp(&b.page_id));
    let name = root
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| kind.as_str().to_lowercase());
    let mut project = Project::new(name, schema.clone());
    project.source = kind.as_str().to_string();
    project.pages = pages;
    project.root = Some(root.to_path_buf());
    Ok(ImportOutcome {
        project,
        unknown_labels: labels.unknown,
    })
}

/// Imports with a schema holding exactly the labels found in the dataset,
/// in name order. [`DEFAULT_LABEL`] and empty labels stay UNLABELED.
pub fn import_inferred(kind: FormatKind, root: &Path) -> Result<ImportOutcome> {
    let probe = import(kind, root, &LabelSchema::from_names(Vec::<String>::new()))?;
    let schema = LabelSchema::from_names(probe.unknown_labels.keys());
    import(kind, root, &schema)
}

/// Reads `src` as `from` and writes it to `dst` as `to`. Without a schema
/// every label in the source is kept.
pub fn convert(
    from: FormatKind,
    src: &Path,
    to: FormatKind,
    dst: &Path,
    schema: Option<&LabelSchema>,
    include_unlabeled: bool,
) -> Result<(ImportOutcome, Vec<PathBuf>)> {
    let outcome = match schema {
        Some(schema) => import(from, src, schema)?,
        None => import_inferred(from, src)?,
    };
    let files = export(&outcome.project, to, dst, include_unlabeled)?;
    Ok((outcome, files))
}

/// Writes `project` under `root` in the `kind` layout and returns the
/// written paths, relative to `root`.
///
/// UNLABELED segments are written with [`DEFAULT_LABEL`] when
/// `include_unlabeled` is set and skipped otherwise.
pub fn export(project: &Project, kind: FormatKind, root: &Path, include_unlabeled: bool) -> Result<Vec<PathBuf>> {
    export_with(project, kind, root, include_unlabeled, false)
}

pub(crate) fn export_with(
    project: &Project,
    kind: FormatKind,
    root: &Path,
    include_unlabeled: bool,
    placeholder_images: bool,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let mut pages: Vec<ExportPage<'_>> = project
        .pages
        .iter()
        .map(|page| {
            let mut segments: Vec<ExportSegment<'_>> = page
                .segments
                .iter()
                .filter_map(|s| match &s.label {
                    Some(l) => Some(ExportSegment { seg: s, label: l }),
                    None if include_unlabeled => Some(ExportSegment {
                        seg: s,
                        label: DEFAULT_LABEL,
                    }),
                    None => None,
                })
                .collect();
            segments.sort_by_key(|s| s.seg.id);
            ExportPage { page, segments }
        })
        .collect();
    pages.sort_by(|a, b| a.page.page_id.cmp(&b.page.page_id));

    let mut out = Writer {
        root,
        written: Vec::new(),
    };
    for p in &pages {
        out.image(project, p.page, placeholder_images)?;
    }
    match kind {
        FormatKind::Pick => pick::export(&pages, &mut out)?,
        FormatKind::DocBank => docbank::export(&pages, &mut out)?,
        FormatKind::Xfund => xfund::export(&pages, &mut out)?,
        FormatKind::Funsd => funsd::export(&pages, &mut out)?,
    }
    Ok(out.written)
}

pub(crate) struct ExportPage<'a> {
    page: &'a Page,
    segments: Vec<ExportSegment<'a>>,
}

pub(crate) struct ExportSegment<'a> {
    seg: &'a Segment,
    label: &'a str,
}

/// File name of a page's image inside an exported dataset.
fn image_name(page: &Page) -> String {
    let ext = Path::new(&page.image_ref)
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("png");
    format!("{}.{ext}", page.page_id)
}

pub(crate) struct Writer<'a> {
    root: &'a Path,
    written: Vec<PathBuf>,
}

impl Writer<'_> {
    fn write(&mut self, rel: impl Into<PathBuf>, bytes: &[u8]) -> Result<()> {
        let rel = rel.into();
        crate::store::write_atomic(&self.root.join(&rel), bytes)?;
        self.written.push(rel);
        Ok(())
    }

    fn write_json(&mut self, rel: impl Into<PathBuf>, value: &Value) -> Result<()> {
        let rel = rel.into();
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::json(&rel, e))?;
        bytes.push(b'\n');
        self.write(rel, &bytes)
    }

    fn image(&mut self, project: &Project, page: &Page, placeholder: bool) -> Result<()> {
        let rel = Path::new("images").join(image_name(page));
        let dst = self.root.join(&rel);
        let src = project.image_path(page);
        match src {
            Some(src) if src.is_file() => {
                if src != dst {
                    if let Some(parent) = dst.parent() {
                        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                    }
                    fs::copy(&src, &dst).map_err(|e| Error::io(&src, e))?;
                }
            }
            _ if placeholder => {
                if let Some(parent) = dst.parent() {
                    fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                }
                let img = image::GrayImage::from_pixel(page.width, page.height, image::Luma([255]));
                img.save_with_format(&dst, image::ImageFormat::Png)
                    .map_err(|e| Error::Image {
                        path: dst.clone(),
                        message: e.to_string(),
                    })?;
            }
            src => {
                return Err(Error::MissingImage(
                    src.unwrap_or_else(|| PathBuf::from(&page.image_ref)),
                ))
            }
        }
        self.written.push(rel);
        Ok(())
    }
}

/// Maps source label strings onto the schema and tallies the misses.
pub(crate) struct LabelMapper<'a> {
    schema: &'a LabelSchema,
    unknown: BTreeMap<String, usize>,
}

impl<'a> LabelMapper<'a> {
    fn new(schema: &'a LabelSchema) -> Self {
        Self {
            schema,
            unknown: BTreeMap::new(),
        }
    }

    fn map(&mut self, label: &str) -> Option<String> {
        if self.schema.contains(label) {
            return Some(label.to_string());
        }
        if !label.is_empty() && label != DEFAULT_LABEL {
            *self.unknown.entry(label.to_string()).or_default() += 1;
        }
        None
    }
}

/// Pixel dimensions of an image file, read from its header.
fn image_dimensions(path: &Path) -> Result<(u32, u32)> {
    if !path.is_file() {
        return Err(Error::MissingImage(path.to_path_buf()));
    }
    image::image_dimensions(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Finds `images/<stem>.<any extension>` under `root`.
fn find_image(root: &Path, stem: &str) -> Result<PathBuf> {
    let dir = root.join("images");
    let mut found: Vec<PathBuf> = match fs::read_dir(&dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.file_stem().is_some_and(|s| s == stem) && p.is_file())
            .collect(),
        Err(_) => Vec::new(),
    };
    found.sort();
    found
        .into_iter()
        .next()
        .ok_or_else(|| Error::MissingImage(dir.join(format!("{stem}.png"))))
}

/// Files in `dir` with the given extension, sorted by name. A missing
/// directory yields nothing.
fn list_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(dir, e)),
    };
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == ext) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Coordinates print as integers when they are whole.
fn num(v: f64) -> Value {
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        Value::from(v as i64)
    } else {
        Value::from(v)
    }
}

fn fmt_num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Replaces `\`, and each character in `special`, with a `\uXXXX` escape.
fn escape(text: &str, special: &[char]) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        if ch == '\\' || special.contains(&ch) {
            out.push_str(&format!("\\u{:04X}", ch as u32));
        } else {
            out.push(ch);
        }
    }
    out
}

/// Inverse of [`escape`]. Backslashes not starting a valid escape are kept.
fn unescape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(i) = rest.find("\\u") {
        out.push_str(&rest[..i]);
        let tail = &rest[i + 2..];
        let decoded = tail
            .get(..4)
            .filter(|h| h.bytes().all(|b| b.is_ascii_hexdigit()))
            .and_then(|h| u32::from_str_radix(h, 16).ok())
            .and_then(char::from_u32);
        match decoded {
            Some(ch) => {
                out.push(ch);
                rest = &tail[4..];
            }
            None => {
                out.push_str("\\u");
                rest = tail;
            }
        }
    }
    out.push_str(rest);
    out
}

fn rect_quad(x0: f64, y0: f64, x1: f64, y1: f64) -> Quad {
    Quad::from_rect(&Rect::new(x0, y0, x1, y1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Issue {
    MissingPage,
    MissingSegment,
    ExtraSegment,
    Text {
        expected: String,
        found: String,
    },
    Label {
        expected: Option<String>,
        found: Option<String>,
    },
    /// Largest coordinate difference beyond the format's tolerance.
    Coordinates {
        max_delta: f64,
    },
    /// A rotated quad was stored as its axis-aligned hull.
    HullSubstitution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub page_id: String,
    pub segment_id: Option<u64>,
    #[serde(flatten)]
    pub issue: Issue,
}

/// Exports `project` to a scratch directory, imports it back and compares
/// segment by segment. An empty result means the round trip is lossless up
/// to the format's coordinate quantization.
///
/// Pages whose image is unavailable get a blank placeholder of the page size.
pub fn roundtrip_check(project: &Project, kind: FormatKind) -> Result<Vec<Discrepancy>> {
    let dir = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
    export_with(project, kind, dir.path(), true, true)?;
    let back = import(kind, dir.path(), &project.schema)?.project;
    Ok(compare(project, &back, kind))
}

/// Compares pages by id and segments by their position in id order.
pub fn compare(original: &Project, imported: &Project, kind: FormatKind) -> Vec<Discrepancy> {
    let mut out = Vec::new();
    let mut pages: Vec<&Page> = original.pages.iter().collect();
    pages.sort_by(|a, b| a.page_id.cmp(&b.page_id));
    for page in pages {
        let mut report = |segment_id, issue| {
            out.push(Discrepancy {
                page_id: page.page_id.clone(),
                segment_id,
                issue,
            })
        };
        let Some(other) = imported.page(&page.page_id) else {
            report(None, Issue::MissingPage);
            continue;
        };
        let mut a: Vec<&Segment> = page.segments.iter().collect();
        let mut b: Vec<&Segment> = other.segments.iter().collect();
        a.sort_by_key(|s| s.id);
        b.sort_by_key(|s| s.id);
        let (tol_x, tol_y) = match kind {
            FormatKind::DocBank => (
                0.5 * f64::from(page.width) / 1000.0 + 1e-9,
                0.5 * f64::from(page.height) / 1000.0 + 1e-9,
            ),
            _ => (0.0, 0.0),
        };
        for (i, sa) in a.iter().enumerate() {
            let Some(sb) = b.get(i) else {
                report(Some(sa.id), Issue::MissingSegment);
                continue;
            };
            if sa.text != sb.text {
                report(
                    Some(sa.id),
                    Issue::Text {
                        expected: sa.text.clone(),
                        found: sb.text.clone(),
                    },
                );
            }
            if sa.label != sb.label {
                report(
                    Some(sa.id),
                    Issue::Label {
                        expected: sa.label.clone(),
                        found: sb.label.clone(),
                    },
                );
            }
            let expected = if kind.axis_aligned() {
                if !sa.quad.is_axis_aligned() {
                    report(Some(sa.id), Issue::HullSubstitution);
                }
                Quad::from_rect(&sa.quad.bounds())
            } else {
                sa.quad
            };
            let mut worst: f64 = 0.0;
            let mut beyond = false;
            for (p, q) in expected.points.iter().zip(&sb.quad.points) {
                let (dx, dy) = ((p.x - q.x).abs(), (p.y - q.y).abs());
                worst = worst.max(dx).max(dy);
                beyond |= dx > tol_x || dy > tol_y || dx.is_nan() || dy.is_nan();
            }
            if beyond {
                report(Some(sa.id), Issue::Coordinates { max_delta: worst });
            }
        }
        for sb in b.iter().skip(a.len()) {
            report(Some(sb.id), Issue::ExtraSegment);
        }
    }
    out
}
