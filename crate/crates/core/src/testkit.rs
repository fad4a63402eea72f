//! Random fixtures for tests and benchmarks.

use std::path::Path;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::ingest::synth::{SynthPage, SynthText};
use crate::metrics::EntityPair;
use crate::model::{LabelSchema, Page, Project, Segment, Split, CATALOG_LABELS};
use crate::{Quad, Rect};

/// Text fragments that stress every format's escaping.
const FRAGMENTS: [&str; 16] = [
    "Bolt",
    "M6",
    "12.5",
    "a,b",
    "tab\there",
    "line\nbreak",
    "cr\rlf",
    "back\\slash",
    "\\u002C",
    "ünïcödé",
    "日本語",
    "emoji 🔩",
    "quote \"x\"",
    "  padded  ",
    "",
    "#,##0",
];

pub fn random_text<R: Rng>(rng: &mut R) -> String {
    let n = rng.random_range(0..=3);
    (0..n)
        .map(|_| *FRAGMENTS.choose(rng).expect("non-empty"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// A page with up to `max_segments` axis-aligned, non-degenerate segments
/// whose ids increase with gaps.
pub fn random_page<R: Rng>(rng: &mut R, page_id: &str, max_segments: usize) -> Page {
    let w = rng.random_range(200..=1200u32);
    let h = rng.random_range(200..=1200u32);
    let mut page = Page::new(page_id, w, h);
    page.split = *[Split::Train, Split::Val, Split::Test, Split::Unassigned]
        .choose(rng)
        .expect("non-empty");
    let n = rng.random_range(0..=max_segments);
    let mut id = 0;
    for _ in 0..n {
        id += rng.random_range(1..=3u64);
        let (wf, hf) = (f64::from(w), f64::from(h));
        let x0 = rng.random_range(0.0..wf - 1.0);
        let y0 = rng.random_range(0.0..hf - 1.0);
        let x1 = rng.random_range(x0 + 0.5..=wf);
        let y1 = rng.random_range(y0 + 0.5..=hf);
        let mut seg = Segment::new(id, Quad::from_rect(&Rect::new(x0, y0, x1, y1)), random_text(rng));
        if rng.random_bool(0.8) {
            seg.label = Some(CATALOG_LABELS.choose(rng).expect("non-empty").to_string());
        }
        page.segments.push(seg);
    }
    page
}

/// A catalog-schema project with blank page images written under `dir`.
pub fn random_project<R: Rng>(rng: &mut R, dir: &Path, max_pages: usize, max_segments: usize) -> Result<Project> {
    let mut project = Project::new("random", LabelSchema::catalog());
    let pages = rng.random_range(0..=max_pages);
    for i in 0..pages {
        let page = random_page(rng, &format!("page-{:04}", i + 1), max_segments);
        write_blank_image(&dir.join(&page.image_ref), page.width, page.height)?;
        project.pages.push(page);
    }
    project.root = Some(dir.to_path_buf());
    Ok(project)
}

pub fn write_blank_image(path: &Path, width: u32, height: u32) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    image::GrayImage::from_pixel(width, height, image::Luma([255]))
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
}

/// Pairs over an alphabet of `alphabet` labels `A`, `B`, …, each side null
/// with probability `null_p`.
pub fn random_pairs<R: Rng>(rng: &mut R, len: usize, alphabet: usize, null_p: f64) -> Vec<EntityPair> {
    let side = |rng: &mut R| {
        if rng.random_bool(null_p) {
            None
        } else {
            let c = (b'A' + rng.random_range(0..alphabet) as u8) as char;
            Some(c.to_string())
        }
    };
    (0..len)
        .map(|_| EntityPair {
            predicted: side(rng),
            target: side(rng),
        })
        .collect()
}

/// A histogram with a random number of populated bins.
pub fn random_histogram<R: Rng>(rng: &mut R) -> [u64; 256] {
    let mut h = [0u64; 256];
    let bins = rng.random_range(1..=256);
    for _ in 0..bins {
        h[rng.random_range(0..256)] += rng.random_range(1..=10_000);
    }
    h
}

/// Three US Letter pages laid out like a hardware catalog: a wide title, a
/// short description, a four-row price table and a page number.
pub fn sample_catalog() -> Vec<SynthPage> {
    let titles = ["SOCKET HEAD CAP SCREWS", "HEX NUTS AND WASHERS", "THREADED RODS"];
    titles
        .iter()
        .enumerate()
        .map(|(i, title)| {
            let mut page = SynthPage::letter()
                .text(SynthText::new(*title, 72.0, 740.0, 28.0))
                .text(SynthText::new("Alloy steel, black oxide finish.", 72.0, 690.0, 11.0))
                .rect([72.0, 420.0, 200.0, 150.0]);
            for row in 0..4 {
                let y = 360.0 - 24.0 * row as f64;
                page = page
                    .text(SynthText::new(format!("M{}", 4 + 2 * row), 72.0, y, 10.0))
                    .text(SynthText::new(format!("{}.{}0", 3 + row, i), 300.0, y, 10.0));
            }
            page.text(SynthText::new((i + 1).to_string(), 300.0, 20.0, 10.0))
        })
        .collect()
}
