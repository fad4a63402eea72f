//! Born-digital PDF extraction: page rasterization plus positioned text runs.
//!
//! Glyphs are collected through a custom interpreter device, so the text is
//! read from the PDF text layer and never recognized from pixels.

use hayro::hayro_interpret::font::{Glyph, GlyphRun};
use hayro::hayro_interpret::hayro_syntax::{LoadPdfError, Pdf};
use hayro::hayro_interpret::{
    interpret_page, BlendMode, ClipPath, Context, Device, DrawMode, DrawProps, Image, ImageDrawProps, InterpreterCache,
    InterpreterSettings, SoftMask, TransformExt,
};
use hayro::kurbo::{Affine, BezPath, Point as KPoint, Rect as KRect, Vec2};
use hayro::vello_cpu::color::palette::css::WHITE;
use hayro::vello_cpu::peniko::ImageAlphaType;
use hayro::{render, PixmapSettings, RenderCache, RenderSettings};
use image::RgbImage;
use regex::Regex;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::model::{Page, Segment};
use crate::Quad;

/// Em-box extent used for glyph boxes, as fractions of the font size.
const ASCENT: f64 = 0.8;
const DESCENT: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Granularity {
    Char,
    #[default]
    Word,
    Line,
}

impl std::str::FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "char" => Ok(Granularity::Char),
            "word" => Ok(Granularity::Word),
            "line" => Ok(Granularity::Line),
            _ => Err(Error::InvalidArgument(format!(
                "granularity must be char, word or line, got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExtractionOptions {
    pub dpi: f64,
    pub granularity: Granularity,
    /// Segments whose text does not match are dropped.
    pub filter: Option<Regex>,
}

impl Default for ExtractionOptions {
    fn default() -> Self {
        Self {
            dpi: 150.0,
            granularity: Granularity::Word,
            filter: None,
        }
    }
}

impl ExtractionOptions {
    pub fn validate(&self) -> Result<()> {
        if !(36.0..=600.0).contains(&self.dpi) {
            return Err(Error::InvalidArgument(format!(
                "dpi must be within [36, 600], got {}",
                self.dpi
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ExtractedPage {
    pub page: Page,
    pub image: RgbImage,
}

#[derive(Debug, Clone, Default)]
pub struct Extraction {
    pub pages: Vec<ExtractedPage>,
    pub warnings: Vec<String>,
}

/// Extracts every page of `pdf`. Pages are named `page-0001`, … and
/// segments are numbered from 1 in content order.
pub fn extract_pdf(pdf: &[u8], options: &ExtractionOptions) -> Result<Extraction> {
    options.validate()?;
    if is_encrypted(pdf) {
        return Err(Error::Encrypted);
    }
    let doc = Pdf::new(pdf.to_vec()).map_err(|e| match e {
        LoadPdfError::Decryption(_) => Error::Encrypted,
        LoadPdfError::Invalid => Error::Pdf("could not parse document".into()),
    })?;

    let scale = options.dpi / 72.0;
    let settings = InterpreterSettings::default();
    let cache = RenderCache::new();
    let mut out = Extraction::default();
    for (i, pdf_page) in doc.pages().iter().enumerate() {
        let page_id = format!("page-{:04}", i + 1);
        let pixmap = render(
            pdf_page,
            &cache,
            &settings,
            &RenderSettings::default(),
            &PixmapSettings {
                x_scale: scale as f32,
                y_scale: scale as f32,
                bg_color: WHITE,
            },
        );
        let (w, h) = (u32::from(pixmap.width()), u32::from(pixmap.height()));
        let rgba = pixmap.take_rgba8(ImageAlphaType::Alpha);
        let rgb: Vec<u8> = rgba.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect();
        let image = RgbImage::from_raw(w, h, rgb).expect("pixmap size matches");

        let transform = Affine::scale(scale) * pdf_page.initial_transform(true).to_kurbo();
        let interp_cache = InterpreterCache::new();
        let mut ctx = Context::new(
            transform,
            KRect::new(0.0, 0.0, f64::from(w), f64::from(h)),
            &interp_cache,
            pdf_page.xref(),
            settings.clone(),
        );
        let mut collector = GlyphCollector::default();
        interpret_page(pdf_page, &mut ctx, &mut collector);

        if collector.glyphs.is_empty() {
            out.warnings.push(format!("{page_id}: no text layer"));
        }
        let mut page = Page::new(&page_id, w, h);
        page.dpi = options.dpi;
        page.segments = build_segments(&collector.glyphs, options, w, h);
        out.pages.push(ExtractedPage { page, image });
    }
    Ok(out)
}

/// True when the trailer declares an encryption dictionary.
fn is_encrypted(pdf: &[u8]) -> bool {
    const KEY: &[u8] = b"/Encrypt";
    pdf.windows(KEY.len() + 1)
        .any(|w| w.starts_with(KEY) && !w[KEY.len()].is_ascii_alphanumeric())
}

#[derive(Debug, Clone)]
struct RawGlyph {
    text: String,
    /// Top-left, top-right, bottom-right, bottom-left in device pixels.
    corners: [KPoint; 4],
    origin: KPoint,
    end: KPoint,
    /// Unit baseline direction.
    dir: Vec2,
    em: f64,
}

impl RawGlyph {
    fn is_space(&self) -> bool {
        self.text.chars().all(char::is_whitespace)
    }
}

/// Text and rounded origin of each glyph in one drawing call.
type RunKey = Vec<(String, [i64; 2])>;

#[derive(Default)]
struct GlyphCollector {
    glyphs: Vec<RawGlyph>,
    /// Start of the previous run and its signature, to drop the second
    /// emission of fill-and-stroke text.
    last_run: Option<(usize, RunKey)>,
}

impl<'a> Device<'a> for GlyphCollector {
    fn draw_path(&mut self, _: &BezPath, _: DrawProps<'a>, _: &DrawMode) {}
    fn push_clip_path(&mut self, _: &ClipPath) {}
    fn push_transparency_group(&mut self, _: f32, _: Option<SoftMask<'a>>, _: BlendMode) {}
    fn draw_image(&mut self, _: Image<'a, '_>, _: ImageDrawProps<'a>) {}
    fn pop_clip(&mut self) {}
    fn pop_transparency_group(&mut self) {}

    fn draw_glyph_run(&mut self, run: &GlyphRun<'_, 'a>, props: DrawProps<'a>, _: &DrawMode) {
        let start = self.glyphs.len();
        for g in run.glyphs() {
            let t = props.transform * g.transform();
            let (text, advance) = match &**g {
                Glyph::Outline(o) => (
                    o.as_unicode().map(bf_to_string),
                    f64::from(o.advance_width().unwrap_or(500.0)),
                ),
                Glyph::Type3(t3) => (t3.as_unicode().map(bf_to_string), 500.0),
            };
            let text = text.unwrap_or_else(|| '\u{FFFD}'.to_string());
            // Glyph space is 1000 units per em.
            let advance = if advance > 0.0 { advance } else { 100.0 };
            let origin = t * KPoint::new(0.0, 0.0);
            let end = t * KPoint::new(advance, 0.0);
            let up = t * KPoint::new(0.0, 1000.0) - origin;
            let em = up.hypot();
            let along = end - origin;
            let dir = if along.hypot() > 0.0 {
                along / along.hypot()
            } else {
                Vec2::new(1.0, 0.0)
            };
            let asc = 1000.0 * ASCENT;
            let desc = -1000.0 * DESCENT;
            let corners = [
                t * KPoint::new(0.0, asc),
                t * KPoint::new(advance, asc),
                t * KPoint::new(advance, desc),
                t * KPoint::new(0.0, desc),
            ];
            self.glyphs.push(RawGlyph {
                text,
                corners,
                origin,
                end,
                dir,
                em,
            });
        }

        let sig: Vec<(String, [i64; 2])> = self.glyphs[start..]
            .iter()
            .map(|g| (g.text.clone(), [(g.origin.x * 64.0) as i64, (g.origin.y * 64.0) as i64]))
            .collect();
        if let Some((prev_start, prev_sig)) = &self.last_run {
            if *prev_sig == sig && *prev_start + sig.len() == start {
                self.glyphs.truncate(start);
                return;
            }
        }
        self.last_run = Some((start, sig));
    }
}

fn bf_to_string(bf: hayro::hayro_interpret::hayro_cmap::BfString) -> String {
    use hayro::hayro_interpret::hayro_cmap::BfString;
    match bf {
        BfString::Char(c) => c.to_string(),
        BfString::String(s) => s,
    }
}

/// A run of glyphs on one baseline.
#[derive(Debug, Clone)]
struct Run {
    text: String,
    first: [KPoint; 4],
    last: [KPoint; 4],
    origin: KPoint,
    end: KPoint,
    dir: Vec2,
    em: f64,
}

impl Run {
    fn from_glyph(g: &RawGlyph) -> Self {
        Self {
            text: g.text.clone(),
            first: g.corners,
            last: g.corners,
            origin: g.origin,
            end: g.end,
            dir: g.dir,
            em: g.em,
        }
    }

    /// Whether `next` starting at `origin` continues this run, allowing a
    /// forward gap of up to `max_gap` ems.
    fn continues(&self, dir: Vec2, origin: KPoint, em: f64, max_gap: f64) -> bool {
        if self.dir.dot(dir) < 0.99 {
            return false;
        }
        let scale = self.em.max(em);
        let delta = origin - self.end;
        let gap = delta.dot(self.dir);
        let drift = (origin - self.origin).cross(self.dir).abs();
        drift <= 0.2 * scale && gap >= -0.3 * scale && gap <= max_gap * scale
    }

    fn push(&mut self, corners: [KPoint; 4], end: KPoint, em: f64, text: &str, joiner: &str) {
        self.text.push_str(joiner);
        self.text.push_str(text);
        self.last = corners;
        self.end = end;
        self.em = self.em.max(em);
    }

    fn quad(&self) -> [KPoint; 4] {
        [self.first[0], self.last[1], self.last[2], self.first[3]]
    }
}

fn group_words(glyphs: &[RawGlyph]) -> Vec<Run> {
    let mut words = Vec::new();
    let mut current: Option<Run> = None;
    for g in glyphs {
        if g.is_space() {
            words.extend(current.take());
            continue;
        }
        match &mut current {
            Some(w) if w.continues(g.dir, g.origin, g.em, 0.25) => {
                w.push(g.corners, g.end, g.em, &g.text, "");
            }
            _ => {
                words.extend(current.take());
                current = Some(Run::from_glyph(g));
            }
        }
    }
    words.extend(current);
    words
}

fn group_lines(words: Vec<Run>) -> Vec<Run> {
    let mut lines: Vec<Run> = Vec::new();
    for w in words {
        match lines.last_mut() {
            Some(l) if l.continues(w.dir, w.origin, w.em, 1.5) => {
                l.push(w.last, w.end, w.em, &w.text, " ");
            }
            _ => lines.push(w),
        }
    }
    lines
}

fn build_segments(glyphs: &[RawGlyph], options: &ExtractionOptions, w: u32, h: u32) -> Vec<Segment> {
    let runs: Vec<Run> = match options.granularity {
        Granularity::Char => glyphs.iter().filter(|g| !g.is_space()).map(Run::from_glyph).collect(),
        Granularity::Word => group_words(glyphs),
        Granularity::Line => group_lines(group_words(glyphs)),
    };
    let (wf, hf) = (f64::from(w), f64::from(h));
    let mut segments = Vec::new();
    for run in runs {
        if let Some(re) = &options.filter {
            if !re.is_match(&run.text) {
                continue;
            }
        }
        let pts = run.quad().map(|p| Point::new(p.x.clamp(0.0, wf), p.y.clamp(0.0, hf)));
        let quad = Quad::new(pts);
        let b = quad.bounds();
        if b.width() <= 0.0 || b.height() <= 0.0 {
            continue;
        }
        let id = segments.len() as u64 + 1;
        segments.push(Segment::new(id, quad, run.text));
    }
    segments
}
