use std::fs;
use std::path::Path;

use doclabeler::formats::{compare, convert, export, import, import_inferred, roundtrip_check, FormatKind, Issue};
use doclabeler::geometry::Point;
use doclabeler::testkit::{random_project, write_blank_image};
use doclabeler::{Error, LabelSchema, Page, Project, Quad, Rect, Segment};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Quad {
    Quad::from_rect(&Rect::new(x0, y0, x1, y1))
}

fn schema() -> LabelSchema {
    LabelSchema::from_names(["header", "question", "answer", "Title"])
}

/// A one-page project whose image exists under `dir`.
fn project_with(dir: &Path, w: u32, h: u32, segments: Vec<Segment>) -> Project {
    let mut page = Page::new("doc1", w, h);
    page.segments = segments;
    write_blank_image(&dir.join(&page.image_ref), w, h).unwrap();
    let mut p = Project::new("t", schema());
    p.pages.push(page);
    p.root = Some(dir.to_path_buf());
    p
}

#[test]
fn funsd_record_imports_as_segment() {
    let dir = tempfile::tempdir().unwrap();
    write_blank_image(&dir.path().join("images/doc1.png"), 100, 50).unwrap();
    fs::create_dir_all(dir.path().join("annotations")).unwrap();
    fs::write(
        dir.path().join("annotations/doc1.json"),
        r#"{"form":[{"id":0,"text":"Total","box":[10,20,60,35],"label":"header","words":[{"text":"Total","box":[10,20,60,35]}],"linking":[[0,1]]},
                    {"id":1,"text":"9","box":[70,20,80,35],"label":"mystery","words":[],"linking":[]}]}"#,
    )
    .unwrap();
    let out = import(FormatKind::Funsd, dir.path(), &schema()).unwrap();
    let page = &out.project.pages[0];
    assert_eq!((page.width, page.height), (100, 50));
    let seg = &page.segments[0];
    assert_eq!(seg.text, "Total");
    assert_eq!(seg.quad, rect(10.0, 20.0, 60.0, 35.0));
    assert_eq!(seg.label.as_deref(), Some("header"));
    assert_eq!(page.segments[1].label, None);
    assert_eq!(out.unknown_labels.get("mystery"), Some(&1));

    // linking survives a round trip untouched.
    let out_dir = tempfile::tempdir().unwrap();
    export(&out.project, FormatKind::Funsd, out_dir.path(), true).unwrap();
    let text = fs::read_to_string(out_dir.path().join("annotations/doc1.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["form"][0]["linking"], serde_json::json!([[0, 1]]));
    assert_eq!(v["form"][0]["box"], serde_json::json!([10, 20, 60, 35]));
    assert_eq!(v["form"][1]["label"], "other");
}

#[test]
fn empty_dataset_gives_empty_project() {
    let dir = tempfile::tempdir().unwrap();
    for kind in FormatKind::ALL {
        let p = import(kind, dir.path(), &schema()).unwrap().project;
        assert!(p.pages.is_empty(), "{kind}");
        let out = tempfile::tempdir().unwrap();
        assert!(export(&p, kind, out.path(), true).unwrap().is_empty(), "{kind}");
        assert_eq!(fs::read_dir(out.path()).unwrap().count(), 0, "{kind}");
    }
}

#[test]
fn docbank_denormalizes_by_page_size() {
    let dir = tempfile::tempdir().unwrap();
    write_blank_image(&dir.path().join("images/p.png"), 2000, 1000).unwrap();
    fs::create_dir_all(dir.path().join("txt")).unwrap();
    fs::write(
        dir.path().join("txt/p.txt"),
        "Total\t100\t200\t300\t400\t0\t0\t0\tTimes\tTitle\n",
    )
    .unwrap();
    let project = import(FormatKind::DocBank, dir.path(), &schema()).unwrap().project;
    let seg = &project.pages[0].segments[0];
    assert_eq!(seg.quad, rect(200.0, 200.0, 600.0, 400.0));
    assert_eq!(seg.label.as_deref(), Some("Title"));
}

#[test]
fn docbank_export_normalizes() {
    let dir = tempfile::tempdir().unwrap();
    let p = project_with(
        dir.path(),
        2000,
        1000,
        vec![Segment::new(1, rect(200.0, 200.0, 600.0, 400.0), "Total").with_label("Title")],
    );
    let out = tempfile::tempdir().unwrap();
    export(&p, FormatKind::DocBank, out.path(), false).unwrap();
    let text = fs::read_to_string(out.path().join("txt/doc1.txt")).unwrap();
    assert_eq!(text, "Total\t100\t200\t300\t400\t0\t0\t0\tunknown\tTitle\n");
}

#[test]
fn pick_export_layout() {
    let dir = tempfile::tempdir().unwrap();
    let p = project_with(
        dir.path(),
        100,
        100,
        vec![Segment::new(1, rect(10.0, 20.0, 60.0, 35.0), "Total").with_label("header")],
    );
    let out = tempfile::tempdir().unwrap();
    let written = export(&p, FormatKind::Pick, out.path(), false).unwrap();
    let names: Vec<String> = written.iter().map(|p| p.to_string_lossy().into_owned()).collect();
    assert_eq!(
        names,
        [
            "images/doc1.png",
            "boxes_and_transcripts/doc1.tsv",
            "train_samples_list.csv"
        ]
    );
    assert_eq!(
        fs::read_to_string(out.path().join("boxes_and_transcripts/doc1.tsv")).unwrap(),
        "1,10,20,60,20,60,35,10,35,Total,header\n"
    );
    assert_eq!(
        fs::read_to_string(out.path().join("train_samples_list.csv")).unwrap(),
        "1,document,doc1\n"
    );
    assert!(out.path().join("images/doc1.png").is_file());
}

#[test]
fn pick_escapes_commas() {
    let dir = tempfile::tempdir().unwrap();
    let p = project_with(
        dir.path(),
        100,
        100,
        vec![Segment::new(4, rect(1.0, 1.0, 2.0, 2.0), "1,000 pcs").with_label("answer")],
    );
    let out = tempfile::tempdir().unwrap();
    export(&p, FormatKind::Pick, out.path(), false).unwrap();
    let line = fs::read_to_string(out.path().join("boxes_and_transcripts/doc1.tsv")).unwrap();
    assert_eq!(line.matches(',').count(), 10);
    assert!(line.contains("1\\u002C000 pcs"));
    let back = import(FormatKind::Pick, out.path(), &schema()).unwrap().project;
    assert_eq!(back.pages[0].segments[0].text, "1,000 pcs");
    assert_eq!(back.pages[0].segments[0].id, 4);
}

#[test]
fn unlabeled_segments_dropped_unless_included() {
    let dir = tempfile::tempdir().unwrap();
    let p = project_with(
        dir.path(),
        100,
        100,
        vec![
            Segment::new(1, rect(1.0, 1.0, 5.0, 5.0), "a").with_label("header"),
            Segment::new(2, rect(6.0, 1.0, 9.0, 5.0), "b"),
        ],
    );
    for kind in FormatKind::ALL {
        let out = tempfile::tempdir().unwrap();
        export(&p, kind, out.path(), false).unwrap();
        let back = import(kind, out.path(), &schema()).unwrap();
        assert_eq!(back.project.pages[0].segments.len(), 1, "{kind}");
        assert!(back.unknown_labels.is_empty());
    }
}

#[test]
fn missing_image_is_named() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir_all(dir.path().join("annotations")).unwrap();
    fs::write(dir.path().join("annotations/scan7.json"), r#"{"form":[]}"#).unwrap();
    match import(FormatKind::Funsd, dir.path(), &schema()).unwrap_err() {
        Error::MissingImage(p) => assert!(p.to_string_lossy().contains("scan7")),
        e => panic!("{e}"),
    }
}

#[test]
fn malformed_records_report_position() {
    let dir = tempfile::tempdir().unwrap();
    write_blank_image(&dir.path().join("images/p.png"), 10, 10).unwrap();
    fs::create_dir_all(dir.path().join("boxes_and_transcripts")).unwrap();
    fs::write(
        dir.path().join("boxes_and_transcripts/p.tsv"),
        "1,0,0,1,0,1,1,0,1,ok,header\n2,0,0,x,0,1,1,0,1,bad,header\n",
    )
    .unwrap();
    let err = import(FormatKind::Pick, dir.path(), &schema()).unwrap_err();
    assert!(matches!(err, Error::Malformed { record: Some(2), .. }), "{err}");
    assert!(err.to_string().contains("p.tsv: record 2"), "{err}");

    fs::create_dir_all(dir.path().join("annotations")).unwrap();
    fs::write(
        dir.path().join("annotations/p.json"),
        r#"{"form":[{"text":"a","box":[0,0,1,1],"label":"header"},{"text":"b","box":[0,0,1]}]}"#,
    )
    .unwrap();
    let err = import(FormatKind::Funsd, dir.path(), &schema()).unwrap_err();
    assert!(matches!(err, Error::Malformed { record: Some(1), .. }), "{err}");
}

#[test]
fn rotated_quad_flags_hull_substitution() {
    let dir = tempfile::tempdir().unwrap();
    let tilted = Quad::new([
        Point::new(20.0, 10.0),
        Point::new(60.0, 20.0),
        Point::new(55.0, 40.0),
        Point::new(15.0, 30.0),
    ]);
    let p = project_with(
        dir.path(),
        100,
        100,
        vec![Segment::new(1, tilted, "x").with_label("header")],
    );
    let report = roundtrip_check(&p, FormatKind::Funsd).unwrap();
    assert_eq!(report.len(), 1);
    assert_eq!(report[0].issue, Issue::HullSubstitution);
    assert!(roundtrip_check(&p, FormatKind::Pick).unwrap().is_empty());
}

#[test]
fn docbank_quantization_within_bound_on_wide_page() {
    let dir = tempfile::tempdir().unwrap();
    let segs = (0..50)
        .map(|i| {
            let x = 13.37 * i as f64 + 0.71;
            Segment::new(i + 1, rect(x, 7.3, x + 40.9, 19.6), format!("w{i}")).with_label("Title")
        })
        .collect();
    let p = project_with(dir.path(), 3000, 200, segs);
    assert!(roundtrip_check(&p, FormatKind::DocBank).unwrap().is_empty());
    let out = tempfile::tempdir().unwrap();
    export(&p, FormatKind::DocBank, out.path(), true).unwrap();
    let back = import(FormatKind::DocBank, out.path(), &p.schema).unwrap().project;
    for (a, b) in p.pages[0].segments.iter().zip(&back.pages[0].segments) {
        for (u, v) in a.quad.points.iter().zip(&b.quad.points) {
            assert!((u.x - v.x).abs() <= 1.5 + 1e-9 && (u.y - v.y).abs() <= 0.1 + 1e-9);
        }
    }
}

#[test]
fn random_projects_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..8 {
        let dir = tempfile::tempdir().unwrap();
        let p = random_project(&mut rng, dir.path(), 4, 40).unwrap();
        for kind in FormatKind::ALL {
            let report = roundtrip_check(&p, kind).unwrap();
            assert!(report.is_empty(), "{kind}: {report:?}");
        }
    }
}

#[test]
fn export_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dir = tempfile::tempdir().unwrap();
    let p = random_project(&mut rng, dir.path(), 3, 30).unwrap();
    let mut shuffled = p.clone();
    shuffled.pages.reverse();
    for page in &mut shuffled.pages {
        page.segments.reverse();
    }
    for kind in FormatKind::ALL {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let fa = export(&p, kind, a.path(), true).unwrap();
        let fb = export(&shuffled, kind, b.path(), true).unwrap();
        assert_eq!(fa, fb);
        for f in &fa {
            assert_eq!(
                fs::read(a.path().join(f)).unwrap(),
                fs::read(b.path().join(f)).unwrap(),
                "{kind} {f:?}"
            );
        }
    }
}

#[test]
fn xfund_keeps_splits() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dir = tempfile::tempdir().unwrap();
    let mut p = random_project(&mut rng, dir.path(), 6, 5).unwrap();
    while p.pages.is_empty() {
        p = random_project(&mut rng, dir.path(), 6, 5).unwrap();
    }
    let out = tempfile::tempdir().unwrap();
    export(&p, FormatKind::Xfund, out.path(), true).unwrap();
    let back = import(FormatKind::Xfund, out.path(), &p.schema).unwrap().project;
    for page in &p.pages {
        assert_eq!(back.page(&page.page_id).unwrap().split, page.split);
    }
    assert!(compare(&p, &back, FormatKind::Xfund).is_empty());
}

#[test]
fn inferred_schema_keeps_every_source_label() {
    let tmp = tempfile::tempdir().unwrap();
    let p = project_with(
        &tmp.path().join("src"),
        100,
        100,
        vec![
            Segment::new(1, rect(1.0, 1.0, 9.0, 9.0), "Name:").with_label("question"),
            Segment::new(2, rect(11.0, 1.0, 29.0, 9.0), "Bolt").with_label("answer"),
            Segment::new(3, rect(1.0, 11.0, 9.0, 19.0), "x"),
        ],
    );
    let funsd = tmp.path().join("funsd");
    export(&p, FormatKind::Funsd, &funsd, true).unwrap();
    let out = import_inferred(FormatKind::Funsd, &funsd).unwrap();
    assert!(out.unknown_labels.is_empty());
    let names: Vec<&str> = out.project.schema.names().collect();
    assert_eq!(names, ["answer", "question"]);
    let labels: Vec<_> = out.project.pages[0]
        .segments
        .iter()
        .map(|s| s.label.as_deref())
        .collect();
    assert_eq!(labels, [Some("question"), Some("answer"), None]);

    let (_, files) = convert(
        FormatKind::Funsd,
        &funsd,
        FormatKind::Pick,
        &tmp.path().join("pick"),
        None,
        true,
    )
    .unwrap();
    let tsv = fs::read_to_string(tmp.path().join("pick").join(&files[1])).unwrap();
    assert_eq!(
        tsv,
        "1,1,1,9,1,9,9,1,9,Name:,question\n2,11,1,29,1,29,9,11,9,Bolt,answer\n3,1,11,9,11,9,19,1,19,x,other\n"
    );
}

#[test]
fn exporting_no_pages_still_creates_the_dataset_root() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = Project::new("e", schema());
    for kind in FormatKind::ALL {
        let root = tmp.path().join(kind.as_str());
        export(&empty, kind, &root, true).unwrap();
        assert!(import(kind, &root, &schema()).unwrap().project.pages.is_empty());
    }
}
