use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use doclabeler::formats::{self, FormatKind};
use doclabeler::ingest::synth::{write_pdf, SynthPage, SynthText};
use doclabeler::testkit::{sample_catalog, write_blank_image};
use doclabeler::{load_project, save_project, LabelSchema, Page, Project, Quad, Rect, Segment};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_doclabeler"));
    c.env_remove("DOCLABELER_HOME");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_project(dir: &Path, pages: usize) -> Project {
    let mut project = Project::new("small", LabelSchema::catalog());
    for i in 0..pages {
        let mut page = Page::new(format!("page-{:04}", i + 1), 400, 300);
        for k in 0..4u64 {
            let y = 20.0 + 40.0 * k as f64;
            let mut seg = Segment::new(
                k + 1,
                Quad::from_rect(&Rect::new(10.0, y, 200.0, y + 20.0)),
                format!("t{k}, x"),
            );
            if k % 2 == 0 {
                seg.label = Some("Title".into());
            }
            page.segments.push(seg);
        }
        write_blank_image(&dir.join(&page.image_ref), 400, 300).unwrap();
        project.pages.push(page);
    }
    project.root = Some(dir.to_path_buf());
    project
}

fn stored_project(tmp: &Path, pages: usize) -> PathBuf {
    let src = tmp.join("src");
    let project = small_project(&src, pages);
    let dir = tmp.join("proj");
    save_project(&project, &dir).unwrap();
    dir
}

#[test]
fn ingest_one_word_pdf() {
    let tmp = tempfile::tempdir().unwrap();
    let pdf = tmp.path().join("one_word.pdf");
    std::fs::write(
        &pdf,
        write_pdf(&[SynthPage::letter().text(SynthText::new("Bolt", 72.0, 700.0, 12.0))]),
    )
    .unwrap();
    let out = tmp.path().join("p");
    let o = run(&["ingest", s(&pdf), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let project = load_project(&out).unwrap();
    assert_eq!(project.pages.len(), 1);
    assert_eq!(project.pages[0].segments.len(), 1);
    assert_eq!(project.pages[0].segments[0].text, "Bolt");
    assert!(out.join("images/page-0001.png").is_file());
}

#[test]
fn ingest_flags_and_home() {
    let tmp = tempfile::tempdir().unwrap();
    let pdf = tmp.path().join("catalog.pdf");
    std::fs::write(&pdf, write_pdf(&sample_catalog())).unwrap();
    let home = tmp.path().join("home");
    let o = bin()
        .env("DOCLABELER_HOME", &home)
        .args([
            "ingest",
            s(&pdf),
            "--dpi",
            "72",
            "--granularity",
            "line",
            "--filter",
            "^M\\d+$",
        ])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let project = load_project(&home.join("catalog")).unwrap();
    assert_eq!(project.pages.len(), 3);
    assert_eq!(project.pages[0].width, 612);
    let texts: Vec<&str> = project.pages[0].segments.iter().map(|s| s.text.as_str()).collect();
    assert_eq!(texts, ["M4", "M6", "M8", "M10"]);

    // relative project names resolve under the home directory
    let o = bin()
        .env("DOCLABELER_HOME", &home)
        .args(["stats", "-p", "catalog"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("pages\t3\nsegments\t12\n"));
}

#[test]
fn convert_matches_export_op_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    let project = small_project(&tmp.path().join("src"), 2);
    let funsd = tmp.path().join("funsd");
    formats::export(&project, FormatKind::Funsd, &funsd, true).unwrap();

    let cli_out = tmp.path().join("cli");
    let o = run(&["convert", "--from", "FUNSD", "--to", "PICK", s(&funsd), s(&cli_out)]);
    assert!(o.status.success(), "{}", stderr(&o));

    let golden = tmp.path().join("golden");
    let (_, files) = formats::convert(FormatKind::Funsd, &funsd, FormatKind::Pick, &golden, None, true).unwrap();
    assert!(!files.is_empty());
    assert_eq!(stdout(&o).lines().count(), files.len());
    for f in &files {
        assert_eq!(
            std::fs::read(cli_out.join(f)).unwrap(),
            std::fs::read(golden.join(f)).unwrap(),
            "{}",
            f.display()
        );
    }
    let tsv = std::fs::read_to_string(cli_out.join("boxes_and_transcripts/page-0001.tsv")).unwrap();
    assert_eq!(
        tsv.lines().next().unwrap(),
        "1,10,20,200,20,200,40,10,40,t0\\u002C x,Title"
    );
}

#[test]
fn import_export_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let project = small_project(&tmp.path().join("src"), 1);
    let xfund = tmp.path().join("xfund");
    formats::export(&project, FormatKind::Xfund, &xfund, true).unwrap();
    let proj = tmp.path().join("proj");
    let o = run(&["import", "--kind", "xfund", s(&xfund), "--out", s(&proj)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(load_project(&proj).unwrap().pages, project.pages);

    let out = tmp.path().join("docbank");
    let o = run(&[
        "export",
        "-p",
        s(&proj),
        "--kind",
        "DOCBANK",
        s(&out),
        "--drop-unlabeled",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let txt = std::fs::read_to_string(out.join("txt/page-0001.txt")).unwrap();
    assert_eq!(txt.lines().count(), 2);
}

#[test]
fn import_reports_unknown_labels() {
    let tmp = tempfile::tempdir().unwrap();
    let mut project = small_project(&tmp.path().join("src"), 1);
    project.schema = LabelSchema::from_names(["Title", "question"]);
    project.pages[0].segments[1].label = Some("question".into());
    let funsd = tmp.path().join("funsd");
    formats::export(&project, FormatKind::Funsd, &funsd, true).unwrap();
    let o = run(&[
        "import",
        "--kind",
        "FUNSD",
        s(&funsd),
        "--out",
        s(&tmp.path().join("a")),
    ]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("unknown label \"question\" on 1 segment(s)"));
    let o = run(&[
        "import",
        "--kind",
        "FUNSD",
        s(&funsd),
        "--out",
        s(&tmp.path().join("b")),
        "--infer-schema",
    ]);
    assert!(o.status.success());
    let b = load_project(&tmp.path().join("b")).unwrap();
    assert!(b.schema.contains("question"));
    assert_eq!(b.pages[0].segments[1].label.as_deref(), Some("question"));
}

#[test]
fn eval_self_gives_ones() {
    let tmp = tempfile::tempdir().unwrap();
    let mut project = small_project(&tmp.path().join("src"), 2);
    for seg in project.pages.iter_mut().flat_map(|p| &mut p.segments) {
        seg.label.get_or_insert_with(|| "Table".into());
    }
    let dir = tmp.path().join("proj");
    save_project(&project, &dir).unwrap();
    let report = tmp.path().join("report.csv");
    let o = run(&["eval", "--ground", s(&dir), "--pred", s(&dir), "--out", s(&report)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&report).unwrap();
    let mut rows = csv.lines();
    assert_eq!(rows.next(), Some("type,mEP,mER,mEF,mEA,support"));
    for row in rows {
        let f: Vec<&str> = row.split(',').collect();
        if f[5] != "0" {
            assert_eq!(&f[1..5], ["1.000000"; 4], "{row}");
        }
    }
    assert!(csv.contains("Title,1.000000,1.000000,1.000000,1.000000,4\n"));
    assert!(csv.ends_with("Overall,1.000000,1.000000,1.000000,1.000000,8\n"));

    // unlabeled pairs only enter the accuracy denominator
    let partial = stored_project(&tmp.path().join("partial"), 1);
    let o = run(&["eval", "--ground", s(&partial), "--pred", s(&partial)]);
    assert!(
        stdout(&o).ends_with("Overall,1.000000,1.000000,1.000000,0.500000,2\n"),
        "{}",
        stdout(&o)
    );
}

#[test]
fn autolabel_split_stats_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = stored_project(tmp.path(), 5);
    let o = run(&["autolabel", "-p", s(&dir), "--heuristic"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        stdout(&o).lines().next(),
        Some("page-0001\tproposals=4\tapplied=2\tdropped=0")
    );
    let o = run(&["split", "-p", s(&dir), "--ratio", "4:1", "--shuffle", "--seed", "7"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "train\t4\nval\t1\n");
    let o = run(&["stats", "-p", s(&dir), "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["pages"], 5);
    assert_eq!(v["segments"], 20);
    assert_eq!(v["unlabeled"], 0);
    let o = run(&["validate", "-p", s(&dir)]);
    assert!(o.status.success());
}

#[test]
fn split_is_reproducible_with_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let a = stored_project(&tmp.path().join("a"), 10);
    let b = stored_project(&tmp.path().join("b"), 10);
    for d in [&a, &b] {
        assert!(run(&["split", "-p", s(d), "--shuffle", "--seed", "42"])
            .status
            .success());
    }
    let splits = |d: &Path| {
        load_project(d)
            .unwrap()
            .pages
            .iter()
            .map(|p| p.split)
            .collect::<Vec<_>>()
    };
    assert_eq!(splits(&a), splits(&b));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = stored_project(tmp.path(), 5);
    let conf = tmp.path().join("doclabeler.conf");
    std::fs::write(
        &conf,
        format!(
            "# pipeline\nproject = {}\nratio = 3:2\nshuffle = false\ndpi = 200\n",
            s(&dir)
        ),
    )
    .unwrap();
    let o = run(&["--config", s(&conf), "split"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), "train\t3\nval\t2\n");
    let o = run(&["split", "--config", s(&conf), "--ratio", "4:1"]);
    assert_eq!(stdout(&o), "train\t4\nval\t1\n");

    std::fs::write(&conf, "colour = red\n").unwrap();
    let o = run(&["--config", s(&conf), "stats", "-p", s(&dir)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown key \"colour\""));
}

fn assert_one_line_error(o: &Output, code: i32, kind: &str) {
    assert_eq!(o.status.code(), Some(code), "{}", stderr(o));
    let err = stderr(o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with(&format!("error[{kind}]: ")), "{err}");
}

#[test]
fn exit_codes_and_single_line_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = stored_project(tmp.path(), 2);

    assert_one_line_error(&run(&["stats", "-p", s(&tmp.path().join("missing"))]), 2, "io");
    assert_one_line_error(&run(&["split", "-p", s(&dir), "--ratio", "4-1"]), 1, "invalid");
    assert_one_line_error(&run(&["split", "-p", s(&dir), "--ratio", "4:1"]), 1, "invalid");
    assert_one_line_error(&run(&["frobnicate"]), 1, "usage");
    assert_one_line_error(&run(&["autolabel", "-p", s(&dir)]), 1, "usage");
    assert_one_line_error(
        &run(&["convert", "--from", "CSV", "--to", "PICK", "a", "b"]),
        1,
        "usage",
    );

    let bad_pdf = tmp.path().join("bad.pdf");
    std::fs::write(&bad_pdf, b"not a pdf").unwrap();
    assert_one_line_error(
        &run(&["ingest", s(&bad_pdf), "--out", s(&tmp.path().join("x"))]),
        1,
        "invalid",
    );
    assert_one_line_error(
        &run(&["ingest", s(&bad_pdf), "--out", s(&tmp.path().join("x")), "--dpi", "10"]),
        1,
        "invalid",
    );

    // a page edited by hand so that a box leaves the page
    let mut project = load_project(&dir).unwrap();
    project.pages[0].segments[0].quad = Quad::from_rect(&Rect::new(10.0, 10.0, 900.0, 20.0));
    doclabeler::store::write_page(&dir, &project.pages[0]).unwrap();
    let o = run(&["validate", "-p", s(&dir)]);
    assert_one_line_error(&o, 1, "invalid");
    assert!(stdout(&o).contains("page page-0001: segment 1: coordinate out of range"));

    let pdf = tmp.path().join("ok.pdf");
    std::fs::write(
        &pdf,
        write_pdf(&[SynthPage::letter().text(SynthText::new("x", 72.0, 700.0, 12.0))]),
    )
    .unwrap();
    assert_one_line_error(&run(&["ingest", s(&pdf)]), 1, "usage");
}

#[test]
fn remote_timeout_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = stored_project(tmp.path(), 1);
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/infer", listener.local_addr().unwrap());
    let o = run(&["autolabel", "-p", s(&dir), "--endpoint", &url, "--timeout", "0.3"]);
    drop(listener);
    assert_one_line_error(&o, 2, "io");
    assert!(stderr(&o).contains("timeout"));
    assert_eq!(load_project(&dir).unwrap().pages[0].version, 0);
}

#[test]
fn preprocess_scales_project() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = stored_project(tmp.path(), 1);
    let o = run(&["preprocess", "-p", s(&dir), "--scale", "0.5", "--binarize"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let p = load_project(&dir).unwrap();
    assert_eq!((p.pages[0].width, p.pages[0].height), (200, 150));
    assert_eq!(p.pages[0].segments[0].quad.bounds(), Rect::new(5.0, 10.0, 100.0, 20.0));
}

mod determinism {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
        let mut out = Vec::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(d) = stack.pop() {
            for e in std::fs::read_dir(&d).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    out.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
                }
            }
        }
        out.sort();
        out
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]

        #[test]
        fn export_is_byte_identical_across_runs(seed: u64, kind in prop::sample::select(vec!["PICK", "DOCBANK", "XFUND", "FUNSD"])) {
            let tmp = tempfile::tempdir().unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let project = doclabeler::testkit::random_project(&mut rng, &tmp.path().join("src"), 3, 20).unwrap();
            let dir = tmp.path().join("proj");
            save_project(&project, &dir).unwrap();
            let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
            for out in [&a, &b] {
                let o = run(&["export", "-p", s(&dir), "--kind", kind, s(out)]);
                prop_assert!(o.status.success(), "{}", stderr(&o));
            }
            prop_assert_eq!(tree(&a), tree(&b));
        }
    }
}
