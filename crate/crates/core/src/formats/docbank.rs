//! DocBank: `txt/<page>.txt` with one tab-separated token per line,
//! `token x0 y0 x1 y1 R G B fontname label`, coordinates normalized to
//! 0..1000 of the page size, plus `images/<page>.<ext>`.

use std::fmt::Write as _;
use std::path::Path;

use super::{
    escape, find_image, image_dimensions, list_files, read_text, rect_quad, stem, unescape, ExportPage, LabelMapper,
    Writer,
};
use crate::error::{Error, Result};
use crate::model::{Page, Segment};

const SPECIAL: [char; 3] = ['\t', '\n', '\r'];

pub(super) fn import(root: &Path, labels: &mut LabelMapper<'_>) -> Result<Vec<Page>> {
    let mut pages = Vec::new();
    for file in list_files(&root.join("txt"), "txt")? {
        let page_id = stem(&file);
        let image = find_image(root, &page_id)?;
        let (w, h) = image_dimensions(&image)?;
        let (wf, hf) = (f64::from(w), f64::from(h));
        let mut page = Page::new(&page_id, w, h);
        page.image_ref = format!("images/{}", image.file_name().unwrap().to_string_lossy());
        for (i, line) in read_text(&file)?.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |msg: String| Error::malformed(&file, Some(i + 1), msg);
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 10 {
                return Err(bad(format!("expected 10 tab-separated fields, found {}", fields.len())));
            }
            let mut c = [0.0; 4];
            for (k, slot) in c.iter_mut().enumerate() {
                *slot = fields[1 + k]
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| bad(format!("bad coordinate {:?}", fields[1 + k])))?;
            }
            let quad = rect_quad(
                c[0] * wf / 1000.0,
                c[1] * hf / 1000.0,
                c[2] * wf / 1000.0,
                c[3] * hf / 1000.0,
            );
            let id = page.segments.len() as u64 + 1;
            let mut seg = Segment::new(id, quad, unescape(fields[0]));
            seg.label = labels.map(&unescape(fields[9]));
            page.segments.push(seg);
        }
        pages.push(page);
    }
    Ok(pages)
}

pub(super) fn export(pages: &[ExportPage<'_>], out: &mut Writer<'_>) -> Result<()> {
    for p in pages {
        let (w, h) = (f64::from(p.page.width), f64::from(p.page.height));
        let norm = |v: f64, dim: f64| (v / dim * 1000.0).round() as i64;
        let mut body = String::new();
        for s in &p.segments {
            let r = s.seg.quad.bounds();
            let _ = writeln!(
                body,
                "{}\t{}\t{}\t{}\t{}\t0\t0\t0\tunknown\t{}",
                escape(&s.seg.text, &SPECIAL),
                norm(r.x0, w),
                norm(r.y0, h),
                norm(r.x1, w),
                norm(r.y1, h),
                escape(s.label, &SPECIAL),
            );
        }
        out.write(format!("txt/{}.txt", p.page.page_id), body.as_bytes())?;
    }
    Ok(())
}
