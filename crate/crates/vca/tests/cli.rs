mod common;

use std::fs;
use std::path::Path;

use common::{p, s, small_universe, vca, vca_ok};
use vca::manifest::save_manifest;
use vca::trials::save_trials;
use vca::vcae::save_store;

const CONFIGS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs");
const GOLDEN: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden");

/// Runs the whole pipeline in `dir` and returns the paths of every output.
fn pipeline(dir: &Path, threads: &str) -> Vec<std::path::PathBuf> {
    let u = small_universe(21);
    save_manifest(&u.corpus, &p(dir, "corpus.jsonl")).unwrap();
    save_store(&u.store, &p(dir, "all.vcae")).unwrap();
    save_trials(&u.trials, &p(dir, "trials.txt")).unwrap();
    fs::write(
        p(dir, "scenario.json"),
        r#"{"n_labelled_speakers": 4, "utts_per_labelled_speaker": 6, "n_minority_speakers": 8, "utts_per_minority_speaker": 1}"#,
    )
    .unwrap();
    let d = |n: &str| p(dir, n);
    vca_ok(&[
        "ingest",
        "--manifest",
        s(&d("corpus.jsonl")),
        "--embeddings",
        s(&d("all.vcae")),
        "--out",
        s(&d("ingested")),
    ]);
    vca_ok(&[
        "scenario",
        "--kind",
        "imb",
        "--config",
        s(&d("scenario.json")),
        "--manifest",
        s(&d("ingested/manifest.jsonl")),
        "--embeddings",
        s(&d("ingested/embeddings.vcae")),
        "--out",
        s(&d("scen")),
        "--seed",
        "5",
    ]);
    let store = d("ingested/embeddings.vcae");
    vca_ok(&[
        "plan",
        "--strategy",
        "rs",
        "--k",
        "9",
        "--scenario",
        s(&d("scen")),
        "--out",
        s(&d("rs.jsonl")),
        "--seed",
        "3",
        "--threads",
        threads,
    ]);
    vca_ok(&[
        "plan",
        "--strategy",
        "nn",
        "--k",
        "9",
        "--scenario",
        s(&d("scen")),
        "--store",
        s(&store),
        "--phi",
        "trained",
        "--out",
        s(&d("nn.jsonl")),
        "--threads",
        threads,
    ]);
    vca_ok(&[
        "convert",
        "--backend",
        "synthetic",
        "--plan",
        s(&d("nn.jsonl")),
        "--scenario",
        s(&d("scen")),
        "--store",
        s(&store),
        "--out",
        s(&d("aug")),
        "--threads",
        threads,
    ]);
    vca_ok(&[
        "convert",
        "--backend",
        "external-emit",
        "--plan",
        s(&d("rs.jsonl")),
        "--scenario",
        s(&d("scen")),
        "--out",
        s(&d("jobs.jsonl")),
    ]);
    vca_ok(&[
        "train",
        "--corpus",
        s(&d("aug/manifest.jsonl")),
        "--store",
        s(&d("aug/embeddings.vcae")),
        "--out",
        s(&d("model.vcam")),
    ]);
    vca_ok(&[
        "eval",
        "--trials",
        s(&d("trials.txt")),
        "--model",
        s(&d("model.vcam")),
        "--store",
        s(&d("all.vcae")),
        "--report",
        s(&d("report.json")),
        "--scores",
        s(&d("scores.txt")),
    ]);
    [
        "ingested/manifest.jsonl",
        "ingested/embeddings.vcae",
        "scen/targets.jsonl",
        "scen/sources.jsonl",
        "scen/scenario.json",
        "scen/truth.jsonl",
        "rs.jsonl",
        "nn.jsonl",
        "aug/manifest.jsonl",
        "aug/embeddings.vcae",
        "jobs.jsonl",
        "model.vcam",
        "report.json",
        "scores.txt",
    ]
    .iter()
    .map(|n| d(n))
    .collect()
}

#[test]
fn pipeline_end_to_end_is_byte_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let outs_a = pipeline(a.path(), "1");
    let outs_b = pipeline(b.path(), "3");
    for (x, y) in outs_a.iter().zip(&outs_b) {
        assert_eq!(
            fs::read(x).unwrap(),
            fs::read(y).unwrap(),
            "{}",
            x.display()
        );
    }

    let nn = fs::read_to_string(a.path().join("nn.jsonl")).unwrap();
    let header: serde_json::Value = serde_json::from_str(nn.lines().next().unwrap()).unwrap();
    assert_eq!(header["strategy"], "nn");
    assert_eq!(header["K"], 9);
    assert_eq!(nn.lines().count(), 1 + 9 * 8);

    let aug = vca::manifest::load_manifest(&a.path().join("aug/manifest.jsonl")).unwrap();
    assert_eq!(aug.len(), 4 * 6 + 8 + 9 * 8);
    for spk in aug.iter().filter_map(|r| r.speaker_id.as_deref()) {
        let n = aug
            .iter()
            .filter(|r| r.speaker_id.as_deref() == Some(spk))
            .count();
        assert!(n == 6 || n == 10, "{spk}: {n}");
    }

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["version"], 1);
    let eer = report["eer"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&eer));
    let scores = fs::read_to_string(a.path().join("scores.txt")).unwrap();
    let first = scores.lines().next().unwrap();
    assert_eq!(
        first
            .split(' ')
            .nth(2)
            .unwrap()
            .split('.')
            .nth(1)
            .unwrap()
            .len(),
        6
    );
}

#[test]
fn usage_errors_exit_one() {
    let out = vca(&[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(vca(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(vca(&["plan", "--bogus"]).status.code(), Some(1));
    assert_eq!(
        vca(&[
            "plan",
            "--strategy",
            "xx",
            "--k",
            "1",
            "--scenario",
            "a",
            "--out",
            "b"
        ])
        .status
        .code(),
        Some(1)
    );
    assert_eq!(vca(&["--help"]).status.code(), Some(0));
}

#[test]
fn data_errors_exit_two_without_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| p(dir.path(), n);
    let out = vca(&[
        "ingest",
        "--manifest",
        s(&d("nope.jsonl")),
        "--embeddings",
        s(&d("nope.vcae")),
        "--out",
        s(&d("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!d("o").exists());

    fs::write(d("m.jsonl"), "").unwrap();
    fs::write(d("bad.vcae"), b"VCAX\x01\0\0\0").unwrap();
    let out = vca(&[
        "ingest",
        "--manifest",
        s(&d("m.jsonl")),
        "--embeddings",
        s(&d("bad.vcae")),
        "--out",
        s(&d("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("magic"));
    assert!(!d("o").exists());
}

#[test]
fn missing_conditional_flag_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let u = small_universe(2);
    let d = |n: &str| p(dir.path(), n);
    save_manifest(&u.corpus, &d("c.jsonl")).unwrap();
    save_store(&u.store, &d("e.vcae")).unwrap();
    fs::write(
        d("cfg.json"),
        r#"{"n_labelled_speakers": 4, "utts_per_labelled_speaker": 3}"#,
    )
    .unwrap();
    vca_ok(&[
        "scenario",
        "--kind",
        "small",
        "--config",
        s(&d("cfg.json")),
        "--manifest",
        s(&d("c.jsonl")),
        "--embeddings",
        s(&d("e.vcae")),
        "--out",
        s(&d("sc")),
    ]);
    let out = vca(&[
        "plan",
        "--strategy",
        "nn",
        "--k",
        "2",
        "--scenario",
        s(&d("sc")),
        "--out",
        s(&d("p.jsonl")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!d("p.jsonl").exists());
    let out = vca(&[
        "plan",
        "--strategy",
        "rs",
        "--k",
        "500",
        "--scenario",
        s(&d("sc")),
        "--out",
        s(&d("p.jsonl")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("eligible pool"));
    assert!(!d("p.jsonl").exists());
}

#[test]
fn simulate_default_config_matches_golden_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let csv = dir.path().join("report.csv");
    vca_ok(&[
        "simulate",
        "--config",
        &format!("{CONFIGS}/sim_imbalanced.json"),
        "--report",
        s(&report),
        "--csv",
        s(&csv),
    ]);
    let got = fs::read_to_string(&report).unwrap();
    let want = fs::read_to_string(format!("{GOLDEN}/sim_imbalanced_report.json")).unwrap();
    assert_eq!(got, want);
    let v: serde_json::Value = serde_json::from_str(&got).unwrap();
    let arms: Vec<&str> = v["aggregates"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["arm"].as_str().unwrap())
        .collect();
    assert_eq!(arms, ["baseline", "rs", "nn"]);
    assert!(fs::read_to_string(&csv)
        .unwrap()
        .starts_with("arm,k,seed_index,eer,min_dcf\n"));
}
