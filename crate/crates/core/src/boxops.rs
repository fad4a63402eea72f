//! Manual cleaning operations on a page's segments.
//!
//! Every operation takes a page by reference and returns the edited copy, so
//! a failed call leaves the caller's page untouched. Each successful call
//! increments the page version by exactly one.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::geometry::Rect as GRect;
use crate::model::{LabelSchema, Page, Provenance, Segment};
use crate::scalar::Scalar;
use crate::{Quad, Rect};

/// Line-major, left-to-right order of the given boxes, as indices.
///
/// Two boxes share a line when their vertical overlap is at least half the
/// smaller height; lines are the connected components of that relation.
/// Lines are ordered by top edge and boxes within a line by left edge. Ties
/// keep input order.
pub fn reading_order_rects<T: Scalar>(rects: &[GRect<T>]) -> Vec<usize> {
    sorted_lines(rects).into_iter().flatten().collect()
}

/// Line number of each box, counting lines in reading order.
pub fn line_numbers<T: Scalar>(rects: &[GRect<T>]) -> Vec<usize> {
    let mut out = vec![0; rects.len()];
    for (k, line) in sorted_lines(rects).iter().enumerate() {
        for &i in line {
            out[i] = k;
        }
    }
    out
}

fn sorted_lines<T: Scalar>(rects: &[GRect<T>]) -> Vec<Vec<usize>> {
    let n = rects.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if same_line(&rects[i], &rects[j]) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }

    // Group members by root; roots are the smallest index of each component.
    let mut lines: Vec<Vec<usize>> = Vec::new();
    let mut line_of = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if line_of[r] == usize::MAX {
            line_of[r] = lines.len();
            lines.push(Vec::new());
        }
        lines[line_of[r]].push(i);
    }

    let cmp = |a: &T, b: &T| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal);
    let top = |line: &Vec<usize>| {
        line.iter()
            .map(|&i| rects[i].y0.clone())
            .reduce(T::min_of)
            .expect("lines are non-empty")
    };
    lines.sort_by(|a, b| cmp(&top(a), &top(b)));
    for line in &mut lines {
        line.sort_by(|&a, &b| cmp(&rects[a].x0, &rects[b].x0));
    }
    lines
}

fn same_line<T: Scalar>(a: &GRect<T>, b: &GRect<T>) -> bool {
    let overlap = a.vertical_overlap(b);
    let min_h = T::min_of(a.height(), b.height());
    if min_h > T::zero() {
        overlap.clone() + overlap >= min_h
    } else {
        a.y0 <= b.y1 && b.y0 <= a.y1
    }
}

/// Reading order of segments, as indices into `segments`.
pub fn reading_order(segments: &[Segment]) -> Vec<usize> {
    let rects: Vec<Rect> = segments.iter().map(|s| s.quad.bounds()).collect();
    reading_order_rects(&rects)
}

/// Deduplicates `ids` and checks they all exist, returning their positions in
/// `page.segments` in page order.
fn select(page: &Page, ids: &[u64]) -> Result<Vec<usize>> {
    if ids.is_empty() {
        return Err(Error::EmptySelection);
    }
    let wanted: HashSet<u64> = ids.iter().copied().collect();
    for &id in ids {
        if page.segment(id).is_none() {
            return Err(Error::UnknownSegment {
                page_id: page.page_id.clone(),
                id,
            });
        }
    }
    Ok(page
        .segments
        .iter()
        .enumerate()
        .filter(|(_, s)| wanted.contains(&s.id))
        .map(|(i, _)| i)
        .collect())
}

fn check_label(schema: &LabelSchema, label: Option<&str>) -> Result<()> {
    match label {
        Some(l) if !schema.contains(l) => Err(Error::UnknownLabel(l.to_string())),
        _ => Ok(()),
    }
}

/// Replaces the named segments by one whose quad is their bounding hull and
/// whose text joins their non-empty texts in reading order.
///
/// The merged segment keeps the smallest id and takes the place of the first
/// selected segment. Its label is the common label, or UNLABELED when the
/// inputs disagree.
pub fn merge_segments(page: &Page, ids: &[u64], joiner: &str) -> Result<Page> {
    let picked = select(page, ids)?;
    let mut out = page.clone();

    if let [only] = picked[..] {
        let seg = &mut out.segments[only];
        seg.provenance = Provenance::Manual;
        seg.confidence = 1.0;
        out.bump_version();
        return Ok(out);
    }

    let members: Vec<&Segment> = picked.iter().map(|&i| &page.segments[i]).collect();
    let rects: Vec<Rect> = members.iter().map(|s| s.quad.bounds()).collect();
    let hull = Rect::hull(&rects).expect("selection is non-empty");
    let text = reading_order_rects(&rects)
        .into_iter()
        .map(|i| members[i].text.as_str())
        .filter(|t| !t.is_empty())
        .collect::<Vec<_>>()
        .join(joiner);
    let first_label = &members[0].label;
    let label = if members.iter().all(|s| &s.label == first_label) {
        first_label.clone()
    } else {
        None
    };
    let merged = Segment {
        id: members.iter().map(|s| s.id).min().expect("non-empty"),
        quad: Quad::from_rect(&hull),
        text,
        label,
        provenance: Provenance::Manual,
        confidence: 1.0,
        extra: Default::default(),
    };

    let first = picked[0];
    let mut segments = Vec::with_capacity(page.segments.len() + 1 - picked.len());
    for (i, s) in page.segments.iter().enumerate() {
        if i == first {
            segments.push(merged.clone());
        } else if picked.binary_search(&i).is_err() {
            segments.push(s.clone());
        }
    }
    out.segments = segments;
    out.bump_version();
    Ok(out)
}

/// Merges the named segments with a single-space joiner and gives the result
/// `label`.
pub fn group_segments(page: &Page, ids: &[u64], label: &str, schema: &LabelSchema) -> Result<Page> {
    check_label(schema, Some(label))?;
    let mut out = merge_segments(page, ids, " ")?;
    let keep = ids.iter().min().copied().expect("merge checked non-empty");
    let seg = out.segment_mut(keep).expect("merged segment keeps the smallest id");
    seg.label = Some(label.to_string());
    Ok(out)
}

pub fn delete_segments(page: &Page, ids: &[u64]) -> Result<Page> {
    let picked = select(page, ids)?;
    let mut out = page.clone();
    out.segments = page
        .segments
        .iter()
        .enumerate()
        .filter(|(i, _)| picked.binary_search(i).is_err())
        .map(|(_, s)| s.clone())
        .collect();
    out.bump_version();
    Ok(out)
}

/// Assigns `label` (`None` for UNLABELED) to the named segments and marks
/// them as manual.
pub fn set_label(page: &Page, ids: &[u64], label: Option<&str>, schema: &LabelSchema) -> Result<Page> {
    check_label(schema, label)?;
    let picked = select(page, ids)?;
    let mut out = page.clone();
    for i in picked {
        let s = &mut out.segments[i];
        s.label = label.map(str::to_string);
        s.provenance = Provenance::Manual;
        s.confidence = 1.0;
    }
    out.bump_version();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(id: u64, x0: f64, y0: f64, x1: f64, y1: f64, text: &str) -> Segment {
        Segment::new(id, Quad::from_rect(&Rect::new(x0, y0, x1, y1)), text)
    }

    fn page(segs: Vec<Segment>) -> Page {
        let mut p = Page::new("p", 200, 200);
        p.segments = segs;
        p
    }

    #[test]
    fn merge_single_only_changes_provenance() {
        let mut s = seg(1, 0.0, 0.0, 5.0, 5.0, "a").with_label("Title");
        s.provenance = Provenance::Auto;
        s.confidence = 0.3;
        let p = page(vec![s.clone()]);
        let m = merge_segments(&p, &[1], " ").unwrap();
        let got = &m.segments[0];
        assert_eq!(got.provenance, Provenance::Manual);
        assert_eq!(
            (got.id, &got.quad, &got.text, &got.label),
            (s.id, &s.quad, &s.text, &s.label)
        );
        assert_eq!(m.version, p.version + 1);
    }

    #[test]
    fn merge_hello_world() {
        let p = page(vec![
            seg(1, 10.0, 10.0, 50.0, 20.0, "Hello"),
            seg(2, 55.0, 10.0, 90.0, 20.0, "World"),
        ]);
        let m = merge_segments(&p, &[2, 1], " ").unwrap();
        assert_eq!(m.segments.len(), 1);
        assert_eq!(m.segments[0].quad.bounds(), Rect::new(10.0, 10.0, 90.0, 20.0));
        assert_eq!(m.segments[0].text, "Hello World");
    }

    #[test]
    fn conflicting_labels_become_unlabeled() {
        let p = page(vec![
            seg(1, 0.0, 0.0, 5.0, 5.0, "a").with_label("Title"),
            seg(2, 6.0, 0.0, 9.0, 5.0, "b").with_label("Table"),
        ]);
        assert_eq!(merge_segments(&p, &[1, 2], " ").unwrap().segments[0].label, None);
    }

    #[test]
    fn merge_is_atomic_on_unknown_id() {
        let p = page(vec![seg(1, 0.0, 0.0, 5.0, 5.0, "a")]);
        let before = p.clone();
        assert!(matches!(
            merge_segments(&p, &[1, 9], " "),
            Err(Error::UnknownSegment { id: 9, .. })
        ));
        assert_eq!(p, before);
    }

    #[test]
    fn group_caption_words() {
        let schema = LabelSchema::catalog();
        let p = page(vec![
            seg(1, 10.0, 100.0, 30.0, 110.0, "Fig"),
            seg(2, 32.0, 100.0, 40.0, 110.0, "4"),
            seg(3, 42.0, 100.0, 80.0, 110.0, "caption"),
        ]);
        let g = group_segments(&p, &[1, 2, 3], "Description", &schema).unwrap();
        assert_eq!(g.segments.len(), 1);
        assert_eq!(g.segments[0].label.as_deref(), Some("Description"));
        assert_eq!(g.segments[0].text, "Fig 4 caption");
        assert!(matches!(
            group_segments(&p, &[1], "Nope", &schema),
            Err(Error::UnknownLabel(_))
        ));
    }

    #[test]
    fn group_two_lines_upper_first() {
        let schema = LabelSchema::catalog();
        let p = page(vec![
            seg(1, 10.0, 40.0, 50.0, 50.0, "second"),
            seg(2, 60.0, 40.0, 90.0, 50.0, "line"),
            seg(3, 10.0, 20.0, 50.0, 30.0, "first"),
        ]);
        let g = group_segments(&p, &[1, 2, 3], "List", &schema).unwrap();
        assert_eq!(g.segments[0].text, "first second line");
    }

    #[test]
    fn group_image_with_caption_has_no_leading_joiner() {
        let schema = LabelSchema::catalog();
        let p = page(vec![
            seg(1, 10.0, 10.0, 100.0, 90.0, ""),
            seg(2, 10.0, 95.0, 60.0, 105.0, "Caption"),
        ]);
        let g = group_segments(&p, &[1, 2], "Image", &schema).unwrap();
        assert_eq!(g.segments[0].text, "Caption");
    }

    #[test]
    fn delete_cases() {
        let p = page(
            (1..=5)
                .map(|i| seg(i, 0.0, i as f64 * 10.0, 5.0, i as f64 * 10.0 + 5.0, "x"))
                .collect(),
        );
        let d = delete_segments(&p, &[2, 4]).unwrap();
        assert_eq!(d.segments.iter().map(|s| s.id).collect::<Vec<_>>(), vec![1, 3, 5]);
        assert!(delete_segments(&p, &[1, 2, 3, 4, 5]).unwrap().segments.is_empty());
        let e = delete_segments(&p, &[]).unwrap_err();
        assert_eq!(e.to_string(), "empty selection");
    }

    #[test]
    fn set_label_cases() {
        let schema = LabelSchema::catalog();
        let mut segs: Vec<_> = (1..=10).map(|i| seg(i, 0.0, 0.0, 5.0, 5.0, "x")).collect();
        segs[0].provenance = Provenance::Auto;
        segs[0].label = Some("Table".into());
        segs[0].confidence = 0.5;
        let p = page(segs);
        let ids: Vec<u64> = (1..=10).collect();
        let l = set_label(&p, &ids, Some("Table"), &schema).unwrap();
        assert_eq!(l.version, p.version + 1);
        assert!(l
            .segments
            .iter()
            .all(|s| s.label.as_deref() == Some("Table") && s.provenance == Provenance::Manual && s.confidence == 1.0));
        assert!(matches!(
            set_label(&p, &[1], Some("Nonexistent"), &schema),
            Err(Error::UnknownLabel(_))
        ));
        assert!(set_label(&p, &[1], None, &schema).unwrap().segments[0].is_unlabeled());
    }

    #[test]
    fn reading_order_examples() {
        let same_band = [Rect::new(55.0, 10.0, 90.0, 20.0), Rect::new(10.0, 10.0, 50.0, 20.0)];
        assert_eq!(reading_order_rects(&same_band), vec![1, 0]);
        let stacked = [Rect::new(10.0, 50.0, 50.0, 60.0), Rect::new(10.0, 10.0, 50.0, 20.0)];
        assert_eq!(reading_order_rects(&stacked), vec![1, 0]);
        // 2x2 grid given in scrambled order: BR, TL, BL, TR.
        let grid = [
            Rect::new(60.0, 40.0, 100.0, 50.0),
            Rect::new(0.0, 0.0, 40.0, 10.0),
            Rect::new(0.0, 40.0, 40.0, 50.0),
            Rect::new(60.0, 0.0, 100.0, 10.0),
        ];
        assert_eq!(reading_order_rects(&grid), vec![1, 3, 2, 0]);
    }

    #[test]
    fn half_overlap_threshold() {
        // Overlap 5 of min height 10: same line.
        let a = [Rect::new(50.0, 0.0, 60.0, 10.0), Rect::new(0.0, 5.0, 10.0, 15.0)];
        assert_eq!(reading_order_rects(&a), vec![1, 0]);
        // Overlap 4 of 10: separate lines, upper first.
        let b = [Rect::new(50.0, 0.0, 60.0, 10.0), Rect::new(0.0, 6.0, 10.0, 16.0)];
        assert_eq!(reading_order_rects(&b), vec![0, 1]);
    }
}
