use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use depwsd::compose::{Aggregation, DependentFilter, FeatureKind, Marker, Variant};
use depwsd::harness::{
    load_dataset, preprocess, render_report, run_experiment, Artifacts, Cell, ClassifierKind, EvalSet, ExperimentSpec,
    PreprocessOptions, ReportFormat,
};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn souris() -> (Vec<depwsd::harness::PairRecord>, Artifacts) {
    let records = load_dataset(fixture("souris.jsonl")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for (name, sub) in [("souris.wpe", "emb"), ("souris.conllu", "parse")] {
        fs::create_dir_all(dir.path().join(sub)).unwrap();
        fs::copy(fixture(name), dir.path().join(sub).join(name)).unwrap();
    }
    let artifacts = Artifacts::load(&dir.path().join("emb"), &dir.path().join("parse"), None).unwrap();
    (records, artifacts)
}

fn mini() -> Artifacts {
    Artifacts::load(&fixture("mini/embeddings"), &fixture("mini/parses"), None).unwrap()
}

#[test]
fn souris_pair_features_by_hand() {
    let (records, artifacts) = souris();
    let run = |variant| {
        preprocess(&records, &artifacts, variant, &PreprocessOptions::default())
            .unwrap()
            .rows[0]
            .values()
            .to_vec()
    };

    // souris = mean(sour, ##is); mouse = mean(mo, ##use)
    let baseline = run(Variant::new(FeatureKind::Baseline, Marker::None));
    assert_eq!(baseline, [3.0, 0.0, 0.0, 4.0, 2.0, 2.0, 2.0, 2.0]);

    let scalar = run(Variant::new(FeatureKind::Baseline, Marker::Scalar));
    assert_eq!(scalar, [3.0, 0.0, 0.0, 4.0, 9999.0, 2.0, 2.0, 2.0, 2.0]);

    // heads: court, button; dependents: après + la, and nothing for mouse
    let concat = run(Variant::new(FeatureKind::concat(Aggregation::Sum), Marker::Sep));
    let expect: Vec<f64> = [
        [3.0, 0.0, 0.0, 4.0],
        [0.0, 0.0, 0.0, 0.0],
        [3.75, -2.75, 2.5, -2.5],
        [0.5, 0.5, 0.5, 0.5],
        [2.0, 2.0, 2.0, 2.0],
        [-0.5, 0.25, -0.125, 0.0625],
        [0.0, 0.0, 0.0, 0.0],
    ]
    .concat();
    assert_eq!(concat, expect);

    let average = run(Variant::new(FeatureKind::concat(Aggregation::Average), Marker::None));
    assert_eq!(&average[8..12], &[1.875, -1.375, 1.25, -1.25]);

    let amped = run(Variant::new(FeatureKind::head_only(), Marker::None).amplified(2.0));
    assert_eq!(amped, [6.0, 0.0, 0.0, 8.0, 0.0, 0.0, 0.0, 0.0, 4.0, 4.0, 4.0, 4.0, -0.5, 0.25, -0.125, 0.0625]);
}

#[test]
fn cache_is_reused_and_left_untouched() {
    let artifacts = mini();
    let records = load_dataset(fixture("mini/train.jsonl")).unwrap();
    let cache = tempfile::tempdir().unwrap();
    let opts = PreprocessOptions {
        cache_dir: Some(cache.path().to_path_buf()),
        ..Default::default()
    };
    let variant = Variant::new(FeatureKind::concat(Aggregation::Sum), Marker::Sep);

    let cold = preprocess(&records, &artifacts, variant, &opts).unwrap();
    assert!(!cold.cache_hit);
    let path = cold.cache_path.clone().unwrap();
    let bytes = fs::read(&path).unwrap();

    let warm = preprocess(&records, &artifacts, variant, &opts).unwrap();
    assert!(warm.cache_hit);
    assert_eq!(warm.cache_path.as_ref(), Some(&path));
    assert_eq!(warm.ids, cold.ids);
    for (a, b) in warm.rows.iter().zip(&cold.rows) {
        let ab: Vec<u64> = a.values().iter().map(|v| v.to_bits()).collect();
        let bb: Vec<u64> = b.values().iter().map(|v| v.to_bits()).collect();
        assert_eq!(ab, bb);
    }
    assert_eq!(fs::read(&path).unwrap(), bytes);
    assert_eq!(fs::read_dir(cache.path()).unwrap().count(), 1);

    let other = PreprocessOptions {
        filter: DependentFilter::NoPunct,
        ..opts
    };
    let filtered = preprocess(&records, &artifacts, variant, &other).unwrap();
    assert!(!filtered.cache_hit);
    assert_ne!(filtered.cache_path, Some(path));
}

#[test]
fn experiment_on_the_mini_corpus_is_repeatable() {
    let artifacts = mini();
    let train = load_dataset(fixture("mini/train.jsonl")).unwrap();
    let dev = load_dataset(fixture("mini/dev.jsonl")).unwrap();
    let cells = vec![
        Cell::new(ClassifierKind::Lr, FeatureKind::Baseline, Marker::Scalar),
        Cell::new(ClassifierKind::Mlp, FeatureKind::concat(Aggregation::Sum), Marker::None),
    ];
    let mut spec = ExperimentSpec::new(
        "mini",
        cells,
        train,
        vec![EvalSet {
            name: "dev".into(),
            records: dev,
        }],
    );
    spec.seeds = vec![0, 1];
    spec.train_sizes = vec![8, 12];
    let a = run_experiment(&spec, &artifacts).unwrap();
    let b = run_experiment(&spec, &artifacts).unwrap();
    assert_eq!(a.rows.len(), 2 * 2 * 2);
    assert_eq!(a.embed_dim, 6);
    for format in [ReportFormat::Tsv, ReportFormat::Markdown, ReportFormat::Json] {
        assert_eq!(render_report(&a, format), render_report(&b, format));
    }
    let dims: Vec<usize> = a.rows.iter().map(|r| r.dimension).collect();
    assert_eq!(dims, [13, 13, 13, 13, 36, 36, 36, 36]);
}

#[test]
fn overlapping_splits_are_refused() {
    let artifacts = mini();
    let train = load_dataset(fixture("mini/train.jsonl")).unwrap();
    let eval = vec![EvalSet {
        name: "dev".into(),
        records: train[..2].to_vec(),
    }];
    let cells = vec![Cell::new(ClassifierKind::Lr, FeatureKind::Baseline, Marker::None)];
    let spec = ExperimentSpec::new("leak", cells, train, eval);
    let err = run_experiment(&spec, &artifacts).unwrap_err();
    assert_eq!(err.kind(), "OverlappingSplits");
}

fn depwsd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_depwsd"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = depwsd(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn command_line_round() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    ok(&["synth", "--out", s(&corpus), "--train-pairs", "120", "--dev-pairs", "40", "--dim", "8", "--lemmas", "3"]);
    let (train, dev) = (corpus.join("train.jsonl"), corpus.join("dev.jsonl"));
    let (emb, parses) = (corpus.join("embeddings"), corpus.join("parses"));
    let cache = dir.path().join("cache");
    let common = [
        "--embeddings",
        s(&emb),
        "--parses",
        s(&parses),
        "--cache-dir",
        s(&cache),
        "--variant",
        "concat+sum",
        "--marker",
        "sep",
    ];
    let with = |extra: &[&str]| -> Vec<String> {
        common.iter().chain(extra).map(|a| a.to_string()).collect()
    };
    let run = |args: Vec<String>| ok(&args.iter().map(String::as_str).collect::<Vec<_>>());

    let first = run(with(&["preprocess", "--data", s(&train)]));
    assert!(first.starts_with("120 vectors of length 56 for concat+sum/sep1/amp=1 (cached to"), "{first}");
    let second = run(with(&["preprocess", "--data", s(&train)]));
    assert!(second.contains("(cache hit:"), "{second}");

    let model = dir.path().join("lr.model");
    run(with(&["--classifier", "lr", "--data", s(&train), "--out", s(&model), "train"]));
    let scored = dir.path().join("scores.tsv");
    let evaluated = run(with(&["evaluate", "--model", s(&model), "--data", s(&dev), "--out", s(&scored)]));
    assert!(evaluated.starts_with("accuracy "), "{evaluated}");
    assert_eq!(fs::read_to_string(&scored).unwrap().lines().count(), 41);

    let results = dir.path().join("results");
    let tsv = run(with(&[
        "experiment",
        "--plan",
        "table4",
        "--data",
        s(&train),
        "--dev",
        s(&dev),
        "--out",
        s(&results),
    ]));
    let lines: Vec<&str> = tsv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("classifier\tvariant\tmarker\tdimension"));
    for (line, dim) in lines[1..].iter().zip(["24", "16", "17"]) {
        assert_eq!(line.split('\t').nth(3), Some(dim), "{line}");
    }
    assert_eq!(fs::read_to_string(results.join("report.tsv")).unwrap(), tsv);

    let md = ok(&["report", "--format", "markdown", "--input", s(&results.join("report.json"))]);
    assert_eq!(md, fs::read_to_string(results.join("report.md")).unwrap());
}

#[test]
fn failures_are_reported_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    fs::write(&bad, "{\"id\":\"x\",\"lang1\":\"en\"}\n").unwrap();
    let out = depwsd(&[
        "preprocess",
        "--data",
        s(&bad),
        "--embeddings",
        s(dir.path()),
        "--parses",
        s(dir.path()),
    ]);
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    let line = stderr.lines().last().unwrap();
    let v: serde_json::Value = serde_json::from_str(line).unwrap();
    assert_eq!(v["error"], "MissingField");
    assert!(v["message"].as_str().unwrap().contains("line 1"));

    let out = depwsd(&["experiment", "--plan", "table8", "--data", s(&bad), "--dev", s(&bad), "--out", s(dir.path())]);
    assert!(!out.status.success());
    let v: serde_json::Value =
        serde_json::from_str(String::from_utf8(out.stderr).unwrap().lines().last().unwrap()).unwrap();
    assert_eq!(v["error"], "Config");
}
