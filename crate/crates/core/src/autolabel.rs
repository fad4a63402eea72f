//! Label proposals: a deterministic heuristic labeler, a client for remote
//! model servers, and the policies that apply proposals to a page.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::boxops::line_numbers;
use crate::error::{Error, Result};
use crate::model::{LabelSchema, Page, Project, Provenance};
use crate::Rect;

/// Confidence attached to every heuristic proposal.
pub const HEURISTIC_CONFIDENCE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelProposal {
    pub segment_id: u64,
    pub label: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LabelerKind {
    Heuristic,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelerBinding {
    pub kind: LabelerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Seconds.
    #[serde(default = "default_timeout")]
    pub timeout: f64,
}

fn default_timeout() -> f64 {
    30.0
}

impl LabelerBinding {
    pub fn heuristic() -> Self {
        Self {
            kind: LabelerKind::Heuristic,
            endpoint: None,
            timeout: default_timeout(),
        }
    }

    pub fn remote(endpoint: impl Into<String>, timeout: f64) -> Self {
        Self {
            kind: LabelerKind::Remote,
            endpoint: Some(endpoint.into()),
            timeout,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == LabelerKind::Remote && self.endpoint.as_deref().is_none_or(str::is_empty) {
            return Err(Error::InvalidArgument("remote labeler needs an endpoint".into()));
        }
        if !(self.timeout.is_finite() && self.timeout > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "timeout must be positive, got {}",
                self.timeout
            )));
        }
        Ok(())
    }
}

/// Which segments a batch of proposals may relabel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Policy {
    /// Only UNLABELED segments.
    #[default]
    FillUnlabeled,
    /// UNLABELED segments and those labeled by an earlier auto pass.
    OverwriteAuto,
    /// Every segment, including manual labels.
    OverwriteAll,
}

impl Policy {
    fn admits(&self, label: Option<&str>, provenance: Provenance) -> bool {
        match self {
            Policy::FillUnlabeled => provenance != Provenance::Manual && label.is_none(),
            Policy::OverwriteAuto => {
                provenance != Provenance::Manual && (label.is_none() || provenance == Provenance::Auto)
            }
            Policy::OverwriteAll => true,
        }
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "FILL_UNLABELED" => Ok(Policy::FillUnlabeled),
            "OVERWRITE_AUTO" => Ok(Policy::OverwriteAuto),
            "OVERWRITE_ALL" => Ok(Policy::OverwriteAll),
            _ => Err(Error::InvalidArgument(format!(
                "unknown policy {s:?}, expected FILL_UNLABELED, OVERWRITE_AUTO or OVERWRITE_ALL"
            ))),
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::FillUnlabeled => "FILL_UNLABELED",
            Policy::OverwriteAuto => "OVERWRITE_AUTO",
            Policy::OverwriteAll => "OVERWRITE_ALL",
        })
    }
}

pub const PAGE_NUMBER: &str = "PageNumber";
pub const IMAGE: &str = "Image";
pub const TITLE: &str = "Title";
pub const TABLE: &str = "Table";
pub const DESCRIPTION: &str = "Description";

/// Labels the heuristic can emit.
pub const HEURISTIC_LABELS: [&str; 5] = [PAGE_NUMBER, IMAGE, TITLE, TABLE, DESCRIPTION];

/// One proposal per segment, in page order. Rules, first match wins:
///
/// 1. digits only, hull within the bottom 5% of the page: `PageNumber`
/// 2. empty text: `Image`
/// 3. top edge within the top 8% and width at least 30% of the page: `Title`
/// 4. left edge within 2 px of at least three segments on other rows: `Table`
/// 5. `Description`
pub fn heuristic_label(page: &Page, schema: &LabelSchema) -> Result<Vec<LabelProposal>> {
    let missing: Vec<String> = HEURISTIC_LABELS
        .iter()
        .filter(|l| !schema.contains(l))
        .map(|l| l.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingLabels(missing));
    }

    let (w, h) = (f64::from(page.width), f64::from(page.height));
    let rects: Vec<Rect> = page.segments.iter().map(|s| s.quad.bounds()).collect();
    let rows = line_numbers(&rects);

    let proposals = page
        .segments
        .iter()
        .enumerate()
        .map(|(i, seg)| {
            let r = &rects[i];
            let text = seg.text.trim();
            let label = if !text.is_empty() && text.chars().all(|c| c.is_ascii_digit()) && r.y0 >= 0.95 * h {
                PAGE_NUMBER
            } else if text.is_empty() {
                IMAGE
            } else if r.y0 <= 0.08 * h && r.width() >= 0.3 * w {
                TITLE
            } else if column_mates(&rects, &rows, i) >= 3 {
                TABLE
            } else {
                DESCRIPTION
            };
            LabelProposal {
                segment_id: seg.id,
                label: label.to_string(),
                confidence: HEURISTIC_CONFIDENCE,
            }
        })
        .collect();
    Ok(proposals)
}

/// Number of distinct other rows holding a segment whose left edge is within
/// 2 px of segment `i`'s.
fn column_mates(rects: &[Rect], rows: &[usize], i: usize) -> usize {
    let mut seen: Vec<usize> = rects
        .iter()
        .enumerate()
        .filter(|&(j, r)| j != i && rows[j] != rows[i] && (r.x0 - rects[i].x0).abs() <= 2.0)
        .map(|(j, _)| rows[j])
        .collect();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteOutcome {
    pub proposals: Vec<LabelProposal>,
    /// Proposals dropped because their label is not in the schema.
    pub dropped: usize,
}

/// Builds the inference request body for one page.
pub fn inference_request(page: &Page, png: &[u8]) -> Value {
    let segments: Vec<Value> = page
        .segments
        .iter()
        .map(|s| json!({ "id": s.id, "quad": s.quad, "text": s.text }))
        .collect();
    json!({
        "page_id": page.page_id,
        "width": page.width,
        "height": page.height,
        "image_png_base64": base64::engine::general_purpose::STANDARD.encode(png),
        "segments": segments,
    })
}

/// Asks a remote model server for proposals. `png` is the page image.
pub fn remote_label(page: &Page, png: &[u8], binding: &LabelerBinding, schema: &LabelSchema) -> Result<RemoteOutcome> {
    binding.validate()?;
    let endpoint = binding.endpoint.as_deref().unwrap_or_default();
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs_f64(binding.timeout)))
        .build()
        .into();
    let body = inference_request(page, png);
    let mut response = agent.post(endpoint).send_json(&body).map_err(map_http_error)?;
    let value: Value = response.body_mut().read_json().map_err(|e| match map_http_error(e) {
        Error::Labeler(m) => Error::LabelerResponse {
            field: "body".into(),
            message: m,
        },
        e => e,
    })?;
    parse_response(&value, page, schema)
}

fn map_http_error(e: ureq::Error) -> Error {
    match e {
        ureq::Error::Timeout(_) => Error::LabelerTimeout,
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => Error::LabelerTimeout,
        e => Error::Labeler(e.to_string()),
    }
}

/// Parses an inference response, dropping proposals whose label is outside
/// the schema.
pub fn parse_response(value: &Value, page: &Page, schema: &LabelSchema) -> Result<RemoteOutcome> {
    let bad = |field: String, message: &str| Error::LabelerResponse {
        field,
        message: message.to_string(),
    };
    let items = value
        .get("proposals")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("proposals".into(), "expected an array"))?;
    let mut proposals = Vec::with_capacity(items.len());
    let mut dropped = 0;
    for (i, item) in items.iter().enumerate() {
        let field = |name: &str| format!("proposals[{i}].{name}");
        let id = item
            .get("id")
            .and_then(Value::as_u64)
            .ok_or_else(|| bad(field("id"), "expected a non-negative integer"))?;
        if page.segment(id).is_none() {
            return Err(bad(field("id"), "no such segment"));
        }
        let label = item
            .get("label")
            .and_then(Value::as_str)
            .ok_or_else(|| bad(field("label"), "expected a string"))?;
        let confidence = item
            .get("confidence")
            .and_then(Value::as_f64)
            .ok_or_else(|| bad(field("confidence"), "expected a number"))?;
        if !(0.0..=1.0).contains(&confidence) {
            return Err(bad(field("confidence"), "must be within [0, 1]"));
        }
        if !schema.contains(label) {
            log::warn!("page {}: dropped proposal with unknown label {label:?}", page.page_id);
            dropped += 1;
            continue;
        }
        proposals.push(LabelProposal {
            segment_id: id,
            label: label.to_string(),
            confidence,
        });
    }
    Ok(RemoteOutcome { proposals, dropped })
}

/// Proposals for one page of `project` from either labeler kind. The remote
/// labeler is sent the page image.
pub fn propose(project: &Project, page: &Page, binding: &LabelerBinding) -> Result<RemoteOutcome> {
    match binding.kind {
        LabelerKind::Heuristic => Ok(RemoteOutcome {
            proposals: heuristic_label(page, &project.schema)?,
            dropped: 0,
        }),
        LabelerKind::Remote => {
            binding.validate()?;
            let path = project
                .image_path(page)
                .ok_or_else(|| Error::MissingImage(page.image_ref.clone().into()))?;
            let png = std::fs::read(&path).map_err(|_| Error::MissingImage(path.clone()))?;
            remote_label(page, &png, binding, &project.schema)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PageLabeling {
    pub page_id: String,
    pub proposals: usize,
    /// Proposals the policy admitted.
    pub applied: usize,
    pub dropped: usize,
}

/// Labels every page in place, page by page. Stops at the first failing
/// page; pages before it keep their new labels.
pub fn autolabel_project(project: &mut Project, binding: &LabelerBinding, policy: Policy) -> Result<Vec<PageLabeling>> {
    let mut report = Vec::with_capacity(project.pages.len());
    for i in 0..project.pages.len() {
        let outcome = propose(project, &project.pages[i], binding)?;
        let page = &project.pages[i];
        let applied = outcome
            .proposals
            .iter()
            .filter(|p| {
                page.segment(p.segment_id)
                    .is_some_and(|s| policy.admits(s.label.as_deref(), s.provenance))
            })
            .count();
        let next = apply_proposals(page, &outcome.proposals, policy)?;
        report.push(PageLabeling {
            page_id: next.page_id.clone(),
            proposals: outcome.proposals.len(),
            applied,
            dropped: outcome.dropped,
        });
        project.pages[i] = next;
    }
    Ok(report)
}

/// Applies proposals admitted by `policy`. Applied segments become AUTO with
/// the proposal's confidence. The version is bumped once even when nothing
/// is admitted. Unknown segment ids fail the whole call.
pub fn apply_proposals(page: &Page, proposals: &[LabelProposal], policy: Policy) -> Result<Page> {
    for p in proposals {
        if page.segment(p.segment_id).is_none() {
            return Err(Error::UnknownSegment {
                page_id: page.page_id.clone(),
                id: p.segment_id,
            });
        }
    }
    let by_id: HashMap<u64, &LabelProposal> = proposals.iter().map(|p| (p.segment_id, p)).collect();
    let mut out = page.clone();
    for seg in &mut out.segments {
        let Some(p) = by_id.get(&seg.id) else { continue };
        if policy.admits(seg.label.as_deref(), seg.provenance) {
            seg.label = Some(p.label.clone());
            seg.provenance = Provenance::Auto;
            seg.confidence = p.confidence;
        }
    }
    out.bump_version();
    Ok(out)
}
