//! PICK: `boxes_and_transcripts/<page>.tsv` with lines
//! `index,x1,y1,x2,y2,x3,y3,x4,y4,transcript,label`, `images/`, and
//! `train_samples_list.csv` rows `index,document_type,file_name`.
//!
//! Commas, backslashes and line breaks inside transcripts are written as
//! `\uXXXX` escapes.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use super::{
    escape, find_image, fmt_num, image_dimensions, list_files, read_text, stem, unescape, ExportPage, LabelMapper,
    Writer,
};
use crate::error::{Error, Result};
use crate::model::{Page, Segment};
use crate::Quad;

const SPECIAL: [char; 3] = [',', '\n', '\r'];
pub const SAMPLES_LIST: &str = "train_samples_list.csv";
const DOCUMENT_TYPE: &str = "document";

pub(super) fn import(root: &Path, labels: &mut LabelMapper<'_>) -> Result<Vec<Page>> {
    let mut pages = Vec::new();
    for file in list_files(&root.join("boxes_and_transcripts"), "tsv")? {
        let page_id = stem(&file);
        let image = find_image(root, &page_id)?;
        let (w, h) = image_dimensions(&image)?;
        let mut page = Page::new(&page_id, w, h);
        page.image_ref = format!("images/{}", image.file_name().unwrap().to_string_lossy());
        let mut indices = Vec::new();
        for (i, line) in read_text(&file)?.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |msg: String| Error::malformed(&file, Some(i + 1), msg);
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() < 11 {
                return Err(bad(format!(
                    "expected at least 11 comma-separated fields, found {}",
                    fields.len()
                )));
            }
            let mut c = [0.0; 8];
            for (k, slot) in c.iter_mut().enumerate() {
                *slot = fields[1 + k]
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| bad(format!("bad coordinate {:?}", fields[1 + k])))?;
            }
            indices.push(fields[0].trim().parse::<u64>().ok());
            let last = fields.len() - 1;
            let transcript = unescape(&fields[9..last].join(","));
            let mut seg = Segment::new(0, Quad::from_flat(c), transcript);
            seg.label = labels.map(&unescape(fields[last]));
            page.segments.push(seg);
        }
        let mut seen = HashSet::new();
        let usable = indices.iter().all(|i| i.is_some_and(|i| seen.insert(i)));
        for (k, seg) in page.segments.iter_mut().enumerate() {
            seg.id = if usable { indices[k].unwrap() } else { k as u64 + 1 };
        }
        pages.push(page);
    }
    Ok(pages)
}

pub(super) fn export(pages: &[ExportPage<'_>], out: &mut Writer<'_>) -> Result<()> {
    let mut samples = String::new();
    for (n, p) in pages.iter().enumerate() {
        let mut body = String::new();
        for s in &p.segments {
            let coords: Vec<String> = s.seg.quad.to_flat().iter().map(|&v| fmt_num(v)).collect();
            let _ = writeln!(
                body,
                "{},{},{},{}",
                s.seg.id,
                coords.join(","),
                escape(&s.seg.text, &SPECIAL),
                escape(s.label, &SPECIAL),
            );
        }
        out.write(format!("boxes_and_transcripts/{}.tsv", p.page.page_id), body.as_bytes())?;
        let _ = writeln!(samples, "{},{DOCUMENT_TYPE},{}", n + 1, p.page.page_id);
    }
    if pages.is_empty() {
        return Ok(());
    }
    out.write(SAMPLES_LIST, samples.as_bytes())
}
