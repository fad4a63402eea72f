use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use doclabeler::autolabel::{
    apply_proposals, autolabel_project, heuristic_label, remote_label, LabelProposal, LabelerBinding, Policy,
};
use doclabeler::testkit::random_page;
use doclabeler::{Error, LabelSchema, Page, Project, Provenance};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

/// Serves one request: parses the JSON body and replies with `respond(body)`
/// after `delay`.
fn stub(respond: impl FnOnce(Value) -> String + Send + 'static, delay: Duration) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut len = 0;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            if line == "\r\n" || line.is_empty() {
                break;
            }
            if let Some((k, v)) = line.split_once(':') {
                if k.eq_ignore_ascii_case("content-length") {
                    len = v.trim().parse().unwrap();
                }
            }
        }
        let mut body = vec![0; len];
        reader.read_exact(&mut body).unwrap();
        let reply = respond(serde_json::from_slice(&body).unwrap());
        thread::sleep(delay);
        let mut stream = stream;
        let _ = write!(
            stream,
            "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
            reply.len()
        );
    });
    format!("http://{addr}/infer")
}

fn labeled_page() -> Page {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut page = random_page(&mut rng, "p", 10);
    while page.segments.len() < 4 {
        page = random_page(&mut rng, "p", 10);
    }
    for s in &mut page.segments {
        s.label.get_or_insert_with(|| "Title".into());
    }
    page
}

#[test]
fn echo_server_returns_current_labels() {
    let page = labeled_page();
    let labels: Vec<(u64, String)> = page.segments.iter().map(|s| (s.id, s.label.clone().unwrap())).collect();
    let url = stub(
        move |req| {
            assert_eq!(req["page_id"], "p");
            assert_eq!(req["image_png_base64"], "iVBORw==");
            assert_eq!(req["segments"][0]["quad"].as_array().unwrap().len(), 8);
            let proposals: Vec<Value> = labels
                .iter()
                .map(|(id, l)| json!({"id": id, "label": l, "confidence": 0.9}))
                .collect();
            json!({ "proposals": proposals }).to_string()
        },
        Duration::ZERO,
    );
    let out = remote_label(
        &page,
        &[0x89, b'P', b'N', b'G'],
        &LabelerBinding::remote(url, 5.0),
        &LabelSchema::catalog(),
    )
    .unwrap();
    assert_eq!(out.dropped, 0);
    let got: Vec<_> = out
        .proposals
        .iter()
        .map(|p| (p.segment_id, Some(p.label.clone())))
        .collect();
    let want: Vec<_> = page.segments.iter().map(|s| (s.id, s.label.clone())).collect();
    assert_eq!(got, want);
}

#[test]
fn partial_answers_touch_only_those_segments() {
    let mut page = labeled_page();
    for s in &mut page.segments {
        s.label = None;
    }
    let half: Vec<u64> = page.segments.iter().step_by(2).map(|s| s.id).collect();
    let ids = half.clone();
    let url = stub(
        move |_| {
            let p: Vec<Value> = ids
                .iter()
                .map(|id| json!({"id": id, "label": "Table", "confidence": 0.7}))
                .collect();
            json!({ "proposals": p }).to_string()
        },
        Duration::ZERO,
    );
    let out = remote_label(&page, b"", &LabelerBinding::remote(url, 5.0), &LabelSchema::catalog()).unwrap();
    let applied = apply_proposals(&page, &out.proposals, Policy::FillUnlabeled).unwrap();
    for s in &applied.segments {
        assert_eq!(s.label.is_some(), half.contains(&s.id));
    }
}

#[test]
fn unknown_label_is_dropped_with_warning() {
    let page = labeled_page();
    let id = page.segments[0].id;
    let url = stub(
        move |_| json!({"proposals": [{"id": id, "label": "Zebra", "confidence": 0.5}]}).to_string(),
        Duration::ZERO,
    );
    let out = remote_label(&page, b"", &LabelerBinding::remote(url, 5.0), &LabelSchema::catalog()).unwrap();
    assert!(out.proposals.is_empty());
    assert_eq!(out.dropped, 1);
}

#[test]
fn slow_server_times_out() {
    let page = labeled_page();
    let url = stub(|_| "{\"proposals\":[]}".into(), Duration::from_millis(1500));
    let err = remote_label(&page, b"", &LabelerBinding::remote(url, 0.3), &LabelSchema::catalog()).unwrap_err();
    assert!(matches!(err, Error::LabelerTimeout), "{err}");
    assert_eq!(err.to_string(), "labeler timeout");
}

#[test]
fn malformed_response_names_field() {
    let page = labeled_page();
    let url = stub(|_| json!({"proposals": [{"id": "one"}]}).to_string(), Duration::ZERO);
    match remote_label(&page, b"", &LabelerBinding::remote(url, 5.0), &LabelSchema::catalog()).unwrap_err() {
        Error::LabelerResponse { field, .. } => assert_eq!(field, "proposals[0].id"),
        e => panic!("{e}"),
    }
    let url = stub(|_| "not json".into(), Duration::ZERO);
    assert!(matches!(
        remote_label(&page, b"", &LabelerBinding::remote(url, 5.0), &LabelSchema::catalog()),
        Err(Error::LabelerResponse { .. })
    ));
}

fn arb_provenance() -> impl Strategy<Value = Provenance> {
    prop::sample::select(vec![Provenance::Imported, Provenance::Manual, Provenance::Auto])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn manual_labels_survive_non_forcing_policies(
        seed: u64,
        provs in prop::collection::vec(arb_provenance(), 40),
        picks in prop::collection::vec((any::<bool>(), 0usize..12), 40),
        policy in prop::sample::select(vec![Policy::FillUnlabeled, Policy::OverwriteAuto]),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut page = random_page(&mut rng, "p", 40);
        for (s, p) in page.segments.iter_mut().zip(&provs) {
            s.provenance = *p;
        }
        let names: Vec<&str> = doclabeler::model::CATALOG_LABELS.to_vec();
        let proposals: Vec<LabelProposal> = page
            .segments
            .iter()
            .zip(&picks)
            .filter(|(_, (keep, _))| *keep)
            .map(|(s, (_, k))| LabelProposal { segment_id: s.id, label: names[*k].into(), confidence: 0.6 })
            .collect();
        let out = apply_proposals(&page, &proposals, policy).unwrap();
        for (a, b) in page.segments.iter().zip(&out.segments) {
            if a.provenance == Provenance::Manual {
                prop_assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn heuristic_is_total_and_deterministic(seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let page = random_page(&mut rng, "p", 60);
        let schema = LabelSchema::catalog();
        let a = heuristic_label(&page, &schema).unwrap();
        prop_assert_eq!(&a, &heuristic_label(&page, &schema).unwrap());
        let ids: Vec<u64> = a.iter().map(|p| p.segment_id).collect();
        prop_assert_eq!(ids, page.segments.iter().map(|s| s.id).collect::<Vec<_>>());
        prop_assert!(a.iter().all(|p| p.confidence == 0.5 && schema.contains(&p.label)));
    }
}

#[test]
fn project_pass_reports_applied_counts() {
    let mut project = Project::new("p", LabelSchema::catalog());
    let mut page = labeled_page();
    page.segments[0].label = None;
    page.segments[1].label = None;
    page.segments[1].provenance = Provenance::Manual;
    project.pages.push(page);
    let report = autolabel_project(&mut project, &LabelerBinding::heuristic(), Policy::FillUnlabeled).unwrap();
    assert_eq!(report.len(), 1);
    assert_eq!(report[0].proposals, project.pages[0].segments.len());
    assert_eq!(report[0].applied, 1);
    assert_eq!(project.pages[0].version, 1);
    assert_eq!(project.pages[0].segments[0].provenance, Provenance::Auto);
    assert_eq!(project.pages[0].segments[1].label, None);
}

#[test]
fn remote_project_pass_needs_the_page_image() {
    let mut project = Project::new("p", LabelSchema::catalog());
    project.pages.push(labeled_page());
    project.root = Some(std::env::temp_dir().join("doclabeler-no-such-dir"));
    let binding = LabelerBinding::remote("http://127.0.0.1:9/", 1.0);
    let err = autolabel_project(&mut project, &binding, Policy::FillUnlabeled).unwrap_err();
    assert!(matches!(err, Error::MissingImage(_)), "{err}");
    assert_eq!(project.pages[0].version, 0);
}
