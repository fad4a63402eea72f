//! FUNSD: `annotations/<page>.json` holding `{"form": [...]}` plus
//! `images/<page>.<ext>`.

use std::path::Path;

use serde_json::{json, Map, Value};

use super::{
    find_image, image_dimensions, list_files, num, rect_quad, stem, ExportPage, ExportSegment, LabelMapper, Writer,
};
use crate::error::{Error, Result};
use crate::model::{Page, Segment};

/// Key under which source `words` and `linking` are kept in segment extras.
const EXTRA_KEY: &str = "funsd";

pub(super) fn import(root: &Path, labels: &mut LabelMapper<'_>) -> Result<Vec<Page>> {
    let mut pages = Vec::new();
    for file in list_files(&root.join("annotations"), "json")? {
        let page_id = stem(&file);
        let image = find_image(root, &page_id)?;
        let (w, h) = image_dimensions(&image)?;
        let doc: Value = crate::store::read_json(&file)?;
        let form = doc
            .get("form")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::malformed(&file, None, "missing \"form\" array"))?;
        let mut page = Page::new(&page_id, w, h);
        page.image_ref = format!("images/{}", image.file_name().unwrap().to_string_lossy());
        page.segments = parse_entries(&file, form, labels)?;
        pages.push(page);
    }
    Ok(pages)
}

pub(super) fn export(pages: &[ExportPage<'_>], out: &mut Writer<'_>) -> Result<()> {
    for p in pages {
        let doc = json!({ "form": entries_json(&p.segments) });
        out.write_json(format!("annotations/{}.json", p.page.page_id), &doc)?;
    }
    Ok(())
}

/// Parses FUNSD-style entries. Entry ids become segment ids unless they are
/// missing or repeated, in which case segments are numbered from 1.
pub(super) fn parse_entries(file: &Path, entries: &[Value], labels: &mut LabelMapper<'_>) -> Result<Vec<Segment>> {
    let mut segments = Vec::with_capacity(entries.len());
    let mut ids = Vec::with_capacity(entries.len());
    for (i, entry) in entries.iter().enumerate() {
        let bad = |msg: &str| Error::malformed(file, Some(i), msg);
        let obj = entry.as_object().ok_or_else(|| bad("entry is not an object"))?;
        let text = obj
            .get("text")
            .and_then(Value::as_str)
            .ok_or_else(|| bad("missing string field \"text\""))?;
        let b = parse_box(obj.get("box")).ok_or_else(|| bad("\"box\" must be 4 numbers"))?;
        let label = match obj.get("label") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => labels.map(s),
            Some(_) => return Err(bad("\"label\" must be a string")),
        };
        ids.push(obj.get("id").and_then(Value::as_u64));

        let mut seg = Segment::new(0, rect_quad(b[0], b[1], b[2], b[3]), text);
        seg.label = label;
        let mut kept = Map::new();
        if let Some(words) = obj.get("words") {
            if !is_self_word(words, text, &b) {
                kept.insert("words".into(), words.clone());
            }
        }
        match obj.get("linking") {
            Some(Value::Array(l)) if l.is_empty() => {}
            Some(l) => {
                kept.insert("linking".into(), l.clone());
            }
            None => {}
        }
        if !kept.is_empty() {
            seg.extra.insert(EXTRA_KEY.into(), Value::Object(kept));
        }
        segments.push(seg);
    }

    let mut seen = std::collections::HashSet::new();
    let usable = ids.iter().all(|id| id.is_some_and(|id| seen.insert(id)));
    for (i, seg) in segments.iter_mut().enumerate() {
        seg.id = if usable { ids[i].unwrap() } else { i as u64 + 1 };
    }
    Ok(segments)
}

pub(super) fn entries_json(segments: &[ExportSegment<'_>]) -> Vec<Value> {
    segments
        .iter()
        .map(|s| {
            let r = s.seg.quad.bounds();
            let bx = json!([num(r.x0), num(r.y0), num(r.x1), num(r.y1)]);
            let kept = s.seg.extra.get(EXTRA_KEY);
            let words = kept
                .and_then(|k| k.get("words"))
                .cloned()
                .unwrap_or_else(|| json!([{ "text": s.seg.text, "box": bx }]));
            let linking = kept
                .and_then(|k| k.get("linking"))
                .cloned()
                .unwrap_or_else(|| json!([]));
            json!({
                "id": s.seg.id,
                "text": s.seg.text,
                "box": bx,
                "label": s.label,
                "words": words,
                "linking": linking,
            })
        })
        .collect()
}

fn parse_box(v: Option<&Value>) -> Option<[f64; 4]> {
    let arr = v?.as_array()?;
    if arr.len() != 4 {
        return None;
    }
    let mut b = [0.0; 4];
    for (slot, x) in b.iter_mut().zip(arr) {
        *slot = x.as_f64()?;
    }
    Some(b)
}

fn is_self_word(words: &Value, text: &str, b: &[f64; 4]) -> bool {
    match words.as_array().map(Vec::as_slice) {
        Some([w]) => w.get("text").and_then(Value::as_str) == Some(text) && parse_box(w.get("box")).as_ref() == Some(b),
        _ => false,
    }
}
