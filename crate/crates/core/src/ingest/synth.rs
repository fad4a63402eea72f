//! Writer for small born-digital PDFs with text at known positions.
//!
//! Used to author ingest fixtures whose ground-truth geometry is known. Text
//! is set in Helvetica (WinAnsi, printable ASCII only) with an explicit
//! `/Widths` array, so glyph advances are exact.

use std::fmt::Write as _;

/// Helvetica advance widths for codes 32..=126, in 1/1000 em.
const HELVETICA_WIDTHS: [u16; 95] = [
    278, 278, 355, 556, 556, 889, 667, 191, 333, 333, 389, 584, 278, 333, 278, 278, // 32-47
    556, 556, 556, 556, 556, 556, 556, 556, 556, 556, 278, 278, 584, 584, 584, 556, // 48-63
    1015, 667, 667, 722, 722, 667, 611, 778, 722, 278, 500, 667, 556, 833, 722, 778, // 64-79
    667, 778, 722, 667, 611, 722, 667, 944, 667, 667, 611, 278, 278, 278, 469, 556, // 80-95
    333, 556, 556, 500, 556, 556, 278, 556, 556, 222, 222, 500, 222, 833, 556, 556, // 96-111
    556, 556, 333, 500, 278, 556, 500, 722, 500, 500, 500, 334, 260, 334, 584, // 112-126
];

/// Advance of `ch` in 1/1000 em; characters outside printable ASCII are
/// written as `?`.
pub fn helvetica_width(ch: char) -> u16 {
    let code = if (' '..='~').contains(&ch) {
        ch as usize
    } else {
        '?' as usize
    };
    HELVETICA_WIDTHS[code - 32]
}

#[derive(Debug, Clone)]
pub struct SynthText {
    pub text: String,
    /// Baseline origin in PDF points, y measured from the page bottom.
    pub x: f64,
    pub y: f64,
    pub size: f64,
    /// Counter-clockwise rotation of the baseline, in degrees.
    pub angle: f64,
}

impl SynthText {
    pub fn new(text: impl Into<String>, x: f64, y: f64, size: f64) -> Self {
        Self {
            text: text.into(),
            x,
            y,
            size,
            angle: 0.0,
        }
    }

    pub fn rotated(mut self, angle: f64) -> Self {
        self.angle = angle;
        self
    }
}

#[derive(Debug, Clone)]
pub struct SynthPage {
    pub width: f64,
    pub height: f64,
    pub texts: Vec<SynthText>,
    /// Filled gray rectangles `[x, y, w, h]` in PDF points.
    pub rects: Vec<[f64; 4]>,
}

impl SynthPage {
    /// US Letter.
    pub fn letter() -> Self {
        Self {
            width: 612.0,
            height: 792.0,
            texts: Vec::new(),
            rects: Vec::new(),
        }
    }

    pub fn text(mut self, t: SynthText) -> Self {
        self.texts.push(t);
        self
    }

    pub fn rect(mut self, r: [f64; 4]) -> Self {
        self.rects.push(r);
        self
    }
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        let ch = if (' '..='~').contains(&ch) { ch } else { '?' };
        if matches!(ch, '(' | ')' | '\\') {
            out.push('\\');
        }
        out.push(ch);
    }
    out
}

fn content_stream(page: &SynthPage) -> String {
    let mut s = String::new();
    for [x, y, w, h] in &page.rects {
        let _ = writeln!(s, "0.6 g {x} {y} {w} {h} re f");
    }
    for t in &page.texts {
        let (sin, cos) = t.angle.to_radians().sin_cos();
        let _ = writeln!(
            s,
            "BT 0 g /F1 {} Tf {cos:.6} {sin:.6} {:.6} {cos:.6} {} {} Tm ({}) Tj ET",
            t.size,
            -sin,
            t.x,
            t.y,
            escape(&t.text)
        );
    }
    s
}

/// Serializes the pages as a complete PDF 1.4 file.
pub fn write_pdf(pages: &[SynthPage]) -> Vec<u8> {
    // Object numbers: 1 catalog, 2 page tree, 3 font, then (page, content)
    // pairs.
    let mut objects: Vec<Vec<u8>> = Vec::new();
    let kids: Vec<String> = (0..pages.len()).map(|i| format!("{} 0 R", 4 + 2 * i)).collect();
    objects.push(b"<< /Type /Catalog /Pages 2 0 R >>".to_vec());
    objects.push(format!("<< /Type /Pages /Kids [{}] /Count {} >>", kids.join(" "), pages.len()).into_bytes());
    let widths: Vec<String> = HELVETICA_WIDTHS.iter().map(u16::to_string).collect();
    objects.push(
        format!(
            "<< /Type /Font /Subtype /Type1 /BaseFont /Helvetica /Encoding /WinAnsiEncoding \
             /FirstChar 32 /LastChar 126 /Widths [{}] >>",
            widths.join(" ")
        )
        .into_bytes(),
    );
    for (i, page) in pages.iter().enumerate() {
        objects.push(
            format!(
                "<< /Type /Page /Parent 2 0 R /MediaBox [0 0 {} {}] \
                 /Resources << /Font << /F1 3 0 R >> >> /Contents {} 0 R >>",
                page.width,
                page.height,
                5 + 2 * i
            )
            .into_bytes(),
        );
        let content = content_stream(page);
        let mut stream = format!("<< /Length {} >>\nstream\n", content.len()).into_bytes();
        stream.extend_from_slice(content.as_bytes());
        stream.extend_from_slice(b"\nendstream");
        objects.push(stream);
    }

    let mut out = b"%PDF-1.4\n%\xe2\xe3\xcf\xd3\n".to_vec();
    let mut offsets = Vec::with_capacity(objects.len());
    for (i, body) in objects.iter().enumerate() {
        offsets.push(out.len());
        out.extend_from_slice(format!("{} 0 obj\n", i + 1).as_bytes());
        out.extend_from_slice(body);
        out.extend_from_slice(b"\nendobj\n");
    }
    let xref_at = out.len();
    let mut xref = format!("xref\n0 {}\n0000000000 65535 f \n", objects.len() + 1);
    for off in offsets {
        let _ = writeln!(xref, "{off:010} 00000 n ");
    }
    let _ = write!(
        xref,
        "trailer\n<< /Size {} /Root 1 0 R >>\nstartxref\n{xref_at}\n%%EOF\n",
        objects.len() + 1
    );
    out.extend_from_slice(xref.as_bytes());
    out
}
