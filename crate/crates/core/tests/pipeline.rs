use std::fs;
use std::path::{Path, PathBuf};

use topo_rec::characteristics::{self, CharacteristicsVector};
use topo_rec::graph::io;
use topo_rec::pipeline::{self, Pipeline, PipelineConfig};
use topo_rec::Error;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/fixture_500x400.tsv")
}

fn config(out: &Path, workers: usize) -> PipelineConfig {
    let text = format!(
        r#"
seed = 11
workers = {workers}
output = "{out}"
models = ["lightgcn"]

[dataset]
path = "{data}"

[sampling]
samples = 4
rate_low = 0.2
rate_high = 0.4
min_users = 20
min_items = 20
min_edges = 150

[train.lightgcn]
embedding_dim = 16
layers = 2
max_epochs = 4
patience = 2
"#,
        out = out.display(),
        data = fixture().display()
    );
    PipelineConfig::parse(&text).unwrap()
}

fn trained_entries(out: &Path) -> usize {
    fs::read_to_string(out.join(pipeline::MANIFEST_FILE))
        .unwrap()
        .lines()
        .filter(|l| l.contains("\"event\":\"trained\""))
        .count()
}

#[test]
fn run_writes_every_output_and_resumes_without_retraining() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    pipeline::run_pipeline(config(&out, 2)).unwrap();
    for f in [
        "records.csv",
        "correlation.csv",
        "degree_fit.csv",
        "degree_fit.json",
        "reports/lightgcn_recall.json",
        "reports/lightgcn_ndcg.csv",
        "alpha_mix/lightgcn_recall.json",
        "seed/graph.tsv",
        "samples/0000/split/train.tsv",
        "samples/0003/models/lightgcn/embeddings.bin",
        "samples/0003/models/lightgcn/trace.csv",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    assert_eq!(trained_entries(&out), 4);
    let before = fs::read(out.join("records.csv")).unwrap();

    pipeline::run_pipeline(config(&out, 2)).unwrap();
    assert_eq!(trained_entries(&out), 4);
    assert_eq!(fs::read(out.join("records.csv")).unwrap(), before);
}

#[test]
fn records_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    Pipeline::open(config(&a, 1)).unwrap().train().unwrap();
    Pipeline::open(config(&b, 4)).unwrap().train().unwrap();
    assert_eq!(
        fs::read(a.join("records.csv")).unwrap(),
        fs::read(b.join("records.csv")).unwrap()
    );
}

#[test]
fn stage_by_stage_matches_run() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    pipeline::run_pipeline(config(&a, 1)).unwrap();
    let p = Pipeline::open(config(&b, 1)).unwrap();
    p.sample().unwrap();
    p.characterize().unwrap();
    p.train().unwrap();
    p.explain(false).unwrap();
    p.alpha_mix(false).unwrap();
    p.degree_fit().unwrap();
    for f in [
        "records.csv",
        "correlation.csv",
        "degree_fit.csv",
        "reports/lightgcn_recall.json",
        "alpha_mix/lightgcn_ndcg.json",
    ] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn stored_characteristics_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let p = Pipeline::open(config(&out, 1)).unwrap();
    p.characterize().unwrap();
    for id in 0..4 {
        let sd = p.sample_dir(id);
        let g = io::read_graph(&sd.join("graph.tsv")).unwrap();
        let stored: CharacteristicsVector =
            serde_json::from_str(&fs::read_to_string(sd.join("characteristics.json")).unwrap()).unwrap();
        assert_eq!(characteristics::compute_all(&g.graph).unwrap(), stored);
    }
}

#[test]
fn corrupt_manifest_is_reported_with_instructions() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    Pipeline::open(config(&out, 1)).unwrap().sample().unwrap();
    let m = out.join(pipeline::MANIFEST_FILE);
    let mut text = fs::read_to_string(&m).unwrap();
    text.push_str("{\"timestamp\": 3, \"event\":\n");
    fs::write(&m, text).unwrap();
    match Pipeline::open(config(&out, 1)) {
        Err(Error::ManifestError(msg)) => assert!(msg.contains("Truncate"), "{msg}"),
        other => panic!("expected ManifestError, got {:?}", other.err()),
    }
}

#[test]
fn changed_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    Pipeline::open(config(&out, 1)).unwrap();
    let mut c = config(&out, 1);
    c.seed = 12;
    assert!(matches!(Pipeline::open(c), Err(Error::ManifestError(_))));
    // worker count is not part of the identity
    assert!(Pipeline::open(config(&out, 3)).is_ok());
}

#[test]
fn missing_dataset_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(&dir.path().join("run"), 1);
    c.dataset.path = dir.path().join("nope.tsv");
    assert!(matches!(Pipeline::open(c), Err(Error::ConfigError(_))));
}

#[test]
fn strict_explain_needs_enough_records() {
    let dir = tempfile::tempdir().unwrap();
    let p = Pipeline::open(config(&dir.path().join("run"), 1)).unwrap();
    assert!(matches!(p.explain(true), Err(Error::InsufficientSamples { .. })));
    let status = fs::read_to_string(p.output().join("reports/lightgcn_recall.json"));
    assert!(status.is_err());
    p.explain(false).unwrap();
    let status = fs::read_to_string(p.output().join("reports/lightgcn_recall.json")).unwrap();
    assert!(status.contains("insufficient_samples"));
}
