//! XFUND: one `<lang>.<split>.json` per split holding every document of that
//! split, plus `images/`.

use std::path::Path;

use serde_json::{json, Value};

use super::funsd::{entries_json, parse_entries};
use super::{image_dimensions, image_name, list_files, stem, ExportPage, LabelMapper, Writer};
use crate::error::{Error, Result};
use crate::model::{Page, Split};

const LANG: &str = "en";

pub(super) fn import(root: &Path, labels: &mut LabelMapper<'_>) -> Result<Vec<Page>> {
    let mut pages = Vec::new();
    for file in list_files(root, "json")? {
        let name = stem(&file);
        let split = name
            .rsplit_once('.')
            .and_then(|(_, s)| Split::parse(s))
            .unwrap_or(Split::Unassigned);
        let doc: Value = crate::store::read_json(&file)?;
        let docs = doc
            .get("documents")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::malformed(&file, None, "missing \"documents\" array"))?;
        for (i, d) in docs.iter().enumerate() {
            let bad = |msg: &str| Error::malformed(&file, Some(i), msg);
            let id = match d.get("id") {
                Some(Value::String(s)) => s.clone(),
                Some(Value::Number(n)) => n.to_string(),
                _ => return Err(bad("missing document \"id\"")),
            };
            let fname = d
                .pointer("/img/fname")
                .and_then(Value::as_str)
                .ok_or_else(|| bad("missing \"img.fname\""))?;
            let image = root.join("images").join(fname);
            let (w, h) = image_dimensions(&image)?;
            let entries = d
                .get("document")
                .and_then(Value::as_array)
                .ok_or_else(|| bad("missing \"document\" array"))?;
            let mut page = Page::new(&id, w, h);
            page.image_ref = format!("images/{fname}");
            page.split = split;
            page.segments = parse_entries(&file, entries, labels).map_err(|e| match e {
                Error::Malformed { file, message, .. } => Error::Malformed {
                    file,
                    record: Some(i),
                    message: format!("document {id:?}: {message}"),
                },
                e => e,
            })?;
            pages.push(page);
        }
    }
    Ok(pages)
}

pub(super) fn export(pages: &[ExportPage<'_>], out: &mut Writer<'_>) -> Result<()> {
    for split in [Split::Train, Split::Val, Split::Test, Split::Unassigned] {
        let docs: Vec<Value> = pages
            .iter()
            .filter(|p| p.page.split == split)
            .map(|p| {
                json!({
                    "id": p.page.page_id,
                    "img": {
                        "fname": image_name(p.page),
                        "width": p.page.width,
                        "height": p.page.height,
                    },
                    "document": entries_json(&p.segments),
                })
            })
            .collect();
        if docs.is_empty() {
            continue;
        }
        let doc = json!({ "lang": LANG, "documents": docs });
        out.write_json(format!("{LANG}.{}.json", split.as_str()), &doc)?;
    }
    Ok(())
}
