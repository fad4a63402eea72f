//! Canonical data model: projects, pages, segments and the label schema.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::Quad;

/// Unknown JSON fields carried through load/save untouched.
pub type Extra = BTreeMap<String, Value>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Provenance {
    Imported,
    Manual,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Split {
    Train,
    Val,
    Test,
    #[default]
    Unassigned,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::Unassigned => "unassigned",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Some(Split::Train),
            "val" | "validation" => Some(Split::Val),
            "test" => Some(Split::Test),
            "unassigned" => Some(Split::Unassigned),
            _ => None,
        }
    }
}

/// One annotatable region. A `label` of `None` is the UNLABELED sentinel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub id: u64,
    pub quad: Quad,
    pub text: String,
    pub label: Option<String>,
    pub provenance: Provenance,
    pub confidence: f64,
    #[serde(flatten)]
    pub extra: Extra,
}

impl Segment {
    pub fn new(id: u64, quad: Quad, text: impl Into<String>) -> Self {
        Self {
            id,
            quad,
            text: text.into(),
            label: None,
            provenance: Provenance::Imported,
            confidence: 1.0,
            extra: Extra::new(),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn is_unlabeled(&self) -> bool {
        self.label.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Page {
    pub page_id: String,
    pub image_ref: String,
    pub width: u32,
    pub height: u32,
    pub dpi: f64,
    pub segments: Vec<Segment>,
    pub version: u64,
    #[serde(default)]
    pub split: Split,
    #[serde(flatten)]
    pub extra: Extra,
}

impl Page {
    pub fn new(page_id: impl Into<String>, width: u32, height: u32) -> Self {
        let page_id = page_id.into();
        Self {
            image_ref: format!("images/{page_id}.png"),
            page_id,
            width,
            height,
            dpi: 72.0,
            segments: Vec::new(),
            version: 0,
            split: Split::Unassigned,
            extra: Extra::new(),
        }
    }

    pub fn segment(&self, id: u64) -> Option<&Segment> {
        self.segments.iter().find(|s| s.id == id)
    }

    pub fn segment_mut(&mut self, id: u64) -> Option<&mut Segment> {
        self.segments.iter_mut().find(|s| s.id == id)
    }

    /// One past the largest segment id in use (ids start at 1).
    pub fn next_segment_id(&self) -> u64 {
        self.segments.iter().map(|s| s.id).max().unwrap_or(0) + 1
    }

    pub(crate) fn bump_version(&mut self) {
        self.version += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl fmt::Display for Rgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{:02x}{:02x}{:02x}", self.0, self.1, self.2)
    }
}

impl Serialize for Rgb {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rgb {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        let hex = s.strip_prefix('#').unwrap_or(&s);
        if hex.len() != 6 {
            return Err(serde::de::Error::custom(format!("bad color {s:?}")));
        }
        let byte = |i: usize| {
            u8::from_str_radix(&hex[i..i + 2], 16).map_err(|_| serde::de::Error::custom(format!("bad color {s:?}")))
        };
        Ok(Rgb(byte(0)?, byte(2)?, byte(4)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelDef {
    pub name: String,
    pub color: Rgb,
    #[serde(default)]
    pub shortcut: Option<char>,
}

impl LabelDef {
    pub fn new(name: impl Into<String>, color: Rgb, shortcut: Option<char>) -> Self {
        Self {
            name: name.into(),
            color,
            shortcut,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSchema {
    pub labels: Vec<LabelDef>,
    pub version: String,
}

/// Document element types of the catalog layout taxonomy, in report order.
pub const CATALOG_LABELS: [&str; 12] = [
    "Image",
    "SubsubCategories",
    "Categories",
    "PageNumber",
    "Description",
    "TableTitle",
    "SubCategories",
    "Table",
    "Title",
    "SubTitle",
    "List",
    "SubsubTitle",
];

impl LabelSchema {
    /// The 12-type catalog taxonomy.
    pub fn catalog() -> Self {
        const STYLE: [(Rgb, char); 12] = [
            (Rgb(0x1f, 0x77, 0xb4), 'i'),
            (Rgb(0xff, 0x7f, 0x0e), 'k'),
            (Rgb(0x2c, 0xa0, 0x2c), 'c'),
            (Rgb(0xd6, 0x27, 0x28), 'n'),
            (Rgb(0x94, 0x67, 0xbd), 'd'),
            (Rgb(0x8c, 0x56, 0x4b), 'y'),
            (Rgb(0xe3, 0x77, 0xc2), 'g'),
            (Rgb(0x7f, 0x7f, 0x7f), 'b'),
            (Rgb(0xbc, 0xbd, 0x22), 't'),
            (Rgb(0x17, 0xbe, 0xcf), 's'),
            (Rgb(0x39, 0x3b, 0x79), 'l'),
            (Rgb(0x63, 0x79, 0x39), 'u'),
        ];
        let labels = CATALOG_LABELS
            .iter()
            .zip(STYLE)
            .map(|(name, (color, key))| LabelDef::new(*name, color, Some(key)))
            .collect();
        Self {
            labels,
            version: "catalog-1".into(),
        }
    }

    /// Schema from bare names with generated colors and no shortcuts.
    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels = names
            .into_iter()
            .enumerate()
            .map(|(i, n)| {
                let h = (i as u32).wrapping_mul(0x9e37_79b9);
                LabelDef::new(n, Rgb((h >> 24) as u8, (h >> 16) as u8, (h >> 8) as u8), None)
            })
            .collect();
        Self {
            labels,
            version: "custom".into(),
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.labels.iter().any(|l| l.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.labels.iter().map(|l| l.name.as_str())
    }

    pub fn by_shortcut(&self, key: char) -> Option<&LabelDef> {
        self.labels.iter().find(|l| l.shortcut == Some(key))
    }
}

impl Default for LabelSchema {
    fn default() -> Self {
        Self::catalog()
    }
}

/// A labeled document collection.
///
/// Equality ignores the timestamps and the on-disk image root.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Project {
    pub name: String,
    pub schema: LabelSchema,
    pub pages: Vec<Page>,
    pub created: DateTime<Utc>,
    pub modified: DateTime<Utc>,
    #[serde(default)]
    pub source: String,
    #[serde(flatten)]
    pub extra: Extra,
    /// Directory against which page `image_ref`s resolve.
    #[serde(skip)]
    pub root: Option<PathBuf>,
}

impl PartialEq for Project {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.schema == other.schema
            && self.pages == other.pages
            && self.source == other.source
            && self.extra == other.extra
    }
}

impl Project {
    pub fn new(name: impl Into<String>, schema: LabelSchema) -> Self {
        let now = Utc::now();
        Self {
            name: name.into(),
            schema,
            pages: Vec::new(),
            created: now,
            modified: now,
            source: String::new(),
            extra: Extra::new(),
            root: None,
        }
    }

    pub fn page(&self, page_id: &str) -> Option<&Page> {
        self.pages.iter().find(|p| p.page_id == page_id)
    }

    pub fn page_mut(&mut self, page_id: &str) -> Option<&mut Page> {
        self.pages.iter_mut().find(|p| p.page_id == page_id)
    }

    pub fn image_path(&self, page: &Page) -> Option<PathBuf> {
        self.root.as_ref().map(|r| r.join(&page.image_ref))
    }

    pub fn segment_count(&self) -> usize {
        self.pages.iter().map(|p| p.segments.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProjectStats {
    pub pages: usize,
    pub segments: usize,
    /// Segment count per label: schema labels first (including zeros), then
    /// any label outside the schema.
    pub labels: Vec<(String, usize)>,
    pub unlabeled: usize,
}

impl Project {
    pub fn stats(&self) -> ProjectStats {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        let mut unlabeled = 0;
        for s in self.pages.iter().flat_map(|p| &p.segments) {
            match &s.label {
                Some(l) => *counts.entry(l).or_default() += 1,
                None => unlabeled += 1,
            }
        }
        let mut labels: Vec<(String, usize)> = self
            .schema
            .names()
            .map(|n| (n.to_string(), counts.remove(n).unwrap_or(0)))
            .collect();
        labels.extend(counts.into_iter().map(|(l, n)| (l.to_string(), n)));
        ProjectStats {
            pages: self.pages.len(),
            segments: self.segment_count(),
            labels,
            unlabeled,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    InvalidPageId,
    DuplicatePageId,
    EmptyPage,
    DuplicateSegmentId,
    CoordinateOutOfRange,
    DegenerateBox,
    UnknownLabel,
    ConfidenceOutOfRange,
    ManualConfidence,
    SchemaEmptyName,
    SchemaDuplicateName,
    SchemaDuplicateShortcut,
}

impl Rule {
    pub fn describe(&self) -> &'static str {
        match self {
            Rule::InvalidPageId => "page id must be a non-empty file name",
            Rule::DuplicatePageId => "duplicate page id",
            Rule::EmptyPage => "page dimensions must be positive",
            Rule::DuplicateSegmentId => "duplicate segment id",
            Rule::CoordinateOutOfRange => "coordinate out of range",
            Rule::DegenerateBox => "bounding box has zero width or height",
            Rule::UnknownLabel => "label not in schema",
            Rule::ConfidenceOutOfRange => "confidence outside [0, 1]",
            Rule::ManualConfidence => "manual segment must have confidence 1.0",
            Rule::SchemaEmptyName => "empty label name",
            Rule::SchemaDuplicateName => "duplicate label name",
            Rule::SchemaDuplicateShortcut => "duplicate shortcut",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub page_id: Option<String>,
    pub segment_id: Option<u64>,
    pub rule: Rule,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(p) = &self.page_id {
            write!(f, "page {p}: ")?;
        }
        if let Some(s) = self.segment_id {
            write!(f, "segment {s}: ")?;
        }
        f.write_str(&self.message)
    }
}

/// Checks every model invariant; an empty result means the project is valid.
pub fn validate_project(project: &Project) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |page: Option<&str>, seg: Option<u64>, rule: Rule, detail: String| {
        let message = if detail.is_empty() {
            rule.describe().to_string()
        } else {
            format!("{}: {detail}", rule.describe())
        };
        out.push(Violation {
            page_id: page.map(str::to_string),
            segment_id: seg,
            rule,
            message,
        });
    };

    let mut names = HashSet::new();
    let mut keys = HashSet::new();
    for l in &project.schema.labels {
        if l.name.is_empty() {
            push(None, None, Rule::SchemaEmptyName, String::new());
        } else if !names.insert(l.name.as_str()) {
            push(None, None, Rule::SchemaDuplicateName, l.name.clone());
        }
        if let Some(k) = l.shortcut {
            if !keys.insert(k) {
                push(None, None, Rule::SchemaDuplicateShortcut, k.to_string());
            }
        }
    }

    let mut page_ids = HashSet::new();
    for page in &project.pages {
        let pid = Some(page.page_id.as_str());
        if !is_valid_page_id(&page.page_id) {
            push(pid, None, Rule::InvalidPageId, format!("{:?}", page.page_id));
        }
        if !page_ids.insert(page.page_id.as_str()) {
            push(pid, None, Rule::DuplicatePageId, String::new());
        }
        if page.width == 0 || page.height == 0 {
            push(pid, None, Rule::EmptyPage, format!("{}x{}", page.width, page.height));
        }
        let (w, h) = (f64::from(page.width), f64::from(page.height));
        let mut seg_ids = HashSet::new();
        for s in &page.segments {
            let sid = Some(s.id);
            if !seg_ids.insert(s.id) {
                push(pid, sid, Rule::DuplicateSegmentId, String::new());
            }
            for p in &s.quad.points {
                let ok = p.x.is_finite() && p.y.is_finite();
                if !ok || p.x < 0.0 || p.y < 0.0 || p.x > w || p.y > h {
                    push(pid, sid, Rule::CoordinateOutOfRange, format!("({}, {})", p.x, p.y));
                    break;
                }
            }
            let b = s.quad.bounds();
            if !(b.width() > 0.0 && b.height() > 0.0) {
                push(pid, sid, Rule::DegenerateBox, String::new());
            }
            if let Some(l) = &s.label {
                if !project.schema.contains(l) {
                    push(pid, sid, Rule::UnknownLabel, format!("{l:?}"));
                }
            }
            if !(0.0..=1.0).contains(&s.confidence) {
                push(pid, sid, Rule::ConfidenceOutOfRange, s.confidence.to_string());
            } else if s.provenance == Provenance::Manual && s.confidence != 1.0 {
                push(pid, sid, Rule::ManualConfidence, s.confidence.to_string());
            }
        }
    }
    out
}

/// Page ids double as file stems in every on-disk layout.
pub fn is_valid_page_id(id: &str) -> bool {
    !id.is_empty()
        && id != "."
        && id != ".."
        && !id.contains(['/', '\\', '\0', ':'])
        && Path::new(id).file_name().is_some()
}
