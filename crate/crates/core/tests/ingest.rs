use std::fs;
use std::path::Path;

use serde_json::json;
use threadforge::data::{build_propagation_graph, ingest_pheme, validate_dataset, Dataset, Label, LabelScheme};
use threadforge::synthetic::{synthetic_dataset, write_pheme_archive, SyntheticSpec};

fn write(path: &Path, v: serde_json::Value) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, serde_json::to_vec(&v).unwrap()).unwrap();
}

fn tweet(id: u64, at: &str, text: &str) -> serde_json::Value {
    json!({
        "id": id, "id_str": id.to_string(), "text": text, "created_at": at,
        "user": {"statuses_count": 1200, "listed_count": 3, "followers_count": 1000,
                 "friends_count": 10, "verified": false}
    })
}

/// Source 10; replies 11 and 12 to the source; 13 replies to 11.
fn hand_thread(dir: &Path, structure: serde_json::Value) {
    write(&dir.join("source-tweets/10.json"), tweet(10, "Wed Jan 07 11:06:08 +0000 2015", "Shots fired at #paper office https://t.co/abc"));
    write(&dir.join("reactions/11.json"), tweet(11, "Wed Jan 07 11:10:00 +0000 2015", "@news is this confirmed?"));
    write(&dir.join("reactions/12.json"), tweet(12, "Wed Jan 07 11:12:00 +0000 2015", "Terrible 😢"));
    write(&dir.join("reactions/13.json"), tweet(13, "Wed Jan 07 12:00:00 +0000 2015", "@a not yet"));
    write(&dir.join("structure.json"), structure);
    write(&dir.join("annotation.json"), json!({"is_rumour": "rumour", "misinformation": "0", "true": "1"}));
}

#[test]
fn hand_built_archive() {
    let tmp = tempfile::tempdir().unwrap();
    let ev = tmp.path().join("paper-all-rnr-threads/rumours");
    hand_thread(&ev.join("10"), json!({"10": {"11": {"13": []}, "12": []}}));
    hand_thread(&ev.join("20"), json!({"10": {"11": {"13": []}}, "99": []}));

    let out = ingest_pheme(tmp.path(), LabelScheme::Ternary).unwrap();
    assert_eq!(out.dataset.num_threads(), 1);
    assert_eq!(out.skips.len(), 1);
    assert_eq!(out.skips.skipped[0].event, "paper");
    assert!(out.skips.skipped[0].path.ends_with("20"));

    let t = &out.dataset.events["paper"][0];
    assert_eq!(t.thread_id, "10");
    assert_eq!(t.label, Label::True);
    assert_eq!(t.tweets.iter().map(|t| t.id).collect::<Vec<_>>(), [10, 11, 12, 13]);
    assert_eq!(t.source().created_at, 1_420_628_768);
    assert_eq!(t.tweets[1].user.unwrap().followers, 1000);
    let g = build_propagation_graph(t).unwrap();
    assert_eq!(g.edges, [(0, 1), (0, 2), (1, 3)]);
}

#[test]
fn missing_reply_record_is_skipped() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("e/rumours/10");
    hand_thread(&dir, json!({"10": {"11": [], "77": []}}));
    let out = ingest_pheme(tmp.path(), LabelScheme::Binary).unwrap();
    assert_eq!(out.dataset.num_threads(), 0);
    assert!(out.skips.skipped[0].reason.contains("77"));
}

#[test]
fn empty_root_gives_empty_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ingest_pheme(tmp.path(), LabelScheme::Binary).unwrap();
    assert_eq!(out.dataset.events.len(), 0);
    assert_eq!(out.dataset.num_threads(), 0);
    assert!(ingest_pheme(&tmp.path().join("absent"), LabelScheme::Binary).is_err());
}

fn large_fixture(scheme: LabelScheme, event: &str, counts: Vec<usize>) -> (tempfile::TempDir, Dataset) {
    let mut spec = SyntheticSpec::new(scheme, vec![(event.into(), counts)], 17);
    spec.min_replies = 0;
    spec.max_replies = 2;
    let d = synthetic_dataset(&spec).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    write_pheme_archive(&d, tmp.path()).unwrap();
    (tmp, d)
}

#[test]
fn event_scale_binary_counts() {
    let (tmp, d) = large_fixture(LabelScheme::Binary, "charliehebdo", vec![458, 1621]);
    let out = ingest_pheme(tmp.path(), LabelScheme::Binary).unwrap();
    assert!(out.skips.is_empty());
    assert_eq!(out.dataset.label_counts("charliehebdo"), [458, 1621]);
    let mut sorted = d.clone();
    sorted.events.values_mut().for_each(|ts| ts.sort_by(|a, b| a.thread_id.cmp(&b.thread_id)));
    assert_eq!(out.dataset, sorted);
    for t in out.dataset.threads() {
        let g = build_propagation_graph(t).unwrap();
        assert_eq!(g.edges.len(), g.n - 1);
    }
    let again = ingest_pheme(tmp.path(), LabelScheme::Binary).unwrap();
    assert_eq!(again.dataset.to_jsonl(), out.dataset.to_jsonl());
}

#[test]
fn event_scale_ternary_counts() {
    let (tmp, _) = large_fixture(LabelScheme::Ternary, "sydneysiege", vec![382, 86, 54]);
    let out = ingest_pheme(tmp.path(), LabelScheme::Ternary).unwrap();
    let report = validate_dataset(&out.dataset);
    assert!(report.is_clean());
    assert_eq!(report.count("sydneysiege", "true"), 382);
    assert_eq!(report.count("sydneysiege", "false"), 86);
    assert_eq!(report.count("sydneysiege", "unverified"), 54);
}

#[test]
fn ternary_ingest_skips_non_rumours() {
    let (tmp, _) = large_fixture(LabelScheme::Binary, "ottawa", vec![3, 2]);
    let out = ingest_pheme(tmp.path(), LabelScheme::Ternary).unwrap();
    assert_eq!(out.dataset.num_threads(), 0);
    let reasons: Vec<&str> = out.skips.skipped.iter().map(|s| s.reason.as_str()).collect();
    assert_eq!(reasons.iter().filter(|r| r.contains("non-rumour")).count(), 2);
    assert_eq!(reasons.len(), 5);
}
