use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_shiftbench"));
    c.env_remove("SHIFTBENCH_DATA_ROOT");
    c
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let o = run(args, cwd);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn value<'a>(stdout: &'a str, key: &str) -> &'a str {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no `{key}` in {stdout}"))
}

/// A small toy dataset under `dir/d`.
fn toy_data(dir: &Path) -> PathBuf {
    ok(&["toy", "gen", "--out", "d", "--train-per-class", "12", "--test-per-class", "6"], dir);
    dir.join("d")
}

/// Copies the toy test manifest under a different dataset id.
fn retag(dir: &Path, id: &str) -> String {
    let text = std::fs::read_to_string(dir.join("d/test.tsv")).unwrap();
    let name = format!("d/{id}.tsv");
    std::fs::write(dir.join(&name), text.replacen("dataset=TOY", &format!("dataset={id}"), 1)).unwrap();
    name
}

fn write_predictions(path: &Path, labels: &[usize], classes: usize, perfect: bool) {
    let names: Vec<String> = (0..classes).map(|c| format!("c{c}")).collect();
    let mut text = format!("predictions\t{}\t{classes}\t{}\n", labels.len(), names.join(","));
    for (i, &l) in labels.iter().enumerate() {
        let hit = if perfect { l } else { (l + i) % classes };
        let mut p = vec![0.1 / (classes - 1) as f64; classes];
        p[hit] = 0.9;
        let cols: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        text.push_str(&format!("{}\t{l}\n", cols.join("\t")));
    }
    std::fs::write(path, text).unwrap();
}

fn benchmark_labels(dir: &Path) -> Vec<usize> {
    std::fs::read_to_string(dir.join("benchmark.tsv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split('\t').nth(2).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn criteria_registry_counts() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(ok(&["criteria"], tmp.path()).lines().count(), 50);
    let us8 = ok(&["criteria", "US8"], tmp.path());
    assert_eq!(us8.lines().count(), 8);
    assert!(!us8.contains("ENQ"));
    let sc2 = ok(&["criteria", "SC2"], tmp.path());
    assert!(sc2.lines().any(|l| l == "SC2/TST-L1\tno-slowdown"));
    let o = run(&["criteria", "XX"], tmp.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn scan_noise_contract() {
    let tmp = TempDir::new().unwrap();
    let d = toy_data(tmp.path());
    std::fs::create_dir(tmp.path().join("empty")).unwrap();
    let o = run(&["scan-noise", "empty"], tmp.path());
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("no WAV files"));
    assert_eq!(std::fs::read_to_string(tmp.path().join("empty/noise_index.csv")).unwrap(), "");

    let clip = d.join("clips/test/low_0000.wav");
    for t in ["cafe", "street"] {
        let dir = tmp.path().join("noise").join(t);
        std::fs::create_dir_all(&dir).unwrap();
        for i in 0..3 {
            std::fs::copy(&clip, dir.join(format!("{i}.wav"))).unwrap();
        }
    }
    ok(&["scan-noise", "noise", "--out", "index.csv"], tmp.path());
    let index = std::fs::read_to_string(tmp.path().join("index.csv")).unwrap();
    assert_eq!(index.lines().count(), 6);
    assert!(index.starts_with("cafe,cafe/0.wav,1.0"));

    std::fs::write(tmp.path().join("noise/street/broken.wav"), b"not audio").unwrap();
    let o = run(&["scan-noise", "noise", "--out", "index2.csv"], tmp.path());
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("broken.wav"));
}

#[test]
fn build_is_deterministic_and_reports() {
    let tmp = TempDir::new().unwrap();
    toy_data(tmp.path());
    let a = ok(&["build", "--manifest", "d/test.tsv", "--criterion", "WHN-L2", "--out", "b1", "--workers", "3"], tmp.path());
    let b = ok(&["build", "--manifest", "d/test.tsv", "--criterion", "WHN-L2", "--out", "b2", "--workers", "1"], tmp.path());
    assert_eq!(value(&a, "digest"), value(&b, "digest"));
    assert_eq!(value(&a, "samples"), "24");
    let again = ok(&["build", "--manifest", "d/test.tsv", "--criterion", "WHN-L2", "--out", "b1"], tmp.path());
    assert_eq!(value(&a, "digest"), value(&again, "digest"));
    let other_seed = ok(
        &["build", "--manifest", "d/test.tsv", "--criterion", "WHN-L2", "--out", "b3", "--seed", "7"],
        tmp.path(),
    );
    assert_ne!(value(&a, "digest"), value(&other_seed, "digest"));

    let run_cfg = std::fs::read_to_string(tmp.path().join("b1/run_config.toml")).unwrap();
    assert!(run_cfg.contains("seed = 2025"));
    assert!(run_cfg.contains("criterion = \"WHN-L2\""));
    assert!(tmp.path().join("b1/tables.toml").exists());
}

#[test]
fn build_dataset_rules_and_exit_codes() {
    let tmp = TempDir::new().unwrap();
    toy_data(tmp.path());
    let us8 = retag(tmp.path(), "US8");
    let o = run(&["build", "--manifest", &us8, "--criterion", "ENQ-L1", "--out", "x"], tmp.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("excluded combination"));

    let sc2 = retag(tmp.path(), "SC2");
    let out = ok(&["build", "--manifest", &sc2, "--criterion", "TST-L1", "--out", "tst"], tmp.path());
    assert_eq!(value(&out, "allow_slowdown"), "false");
    let hist: Vec<f64> = out
        .lines()
        .skip_while(|l| *l != "severity\tcount")
        .skip(1)
        .map(|l| l.split('\t').next().unwrap().parse().unwrap())
        .collect();
    assert!(!hist.is_empty() && hist.iter().all(|&v| v > 0.0));

    let o = run(&["build", "--manifest", "d/test.tsv", "--criterion", "END1-L2", "--out", "x"], tmp.path());
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("does not resolve"));

    let o = run(&["build", "--manifest", "missing.tsv", "--criterion", "WHN-L1", "--out", "x"], tmp.path());
    assert_eq!(code(&o), 3);
    let o = run(&["build", "--manifest", "d/test.tsv", "--criterion", "WHN-L3", "--out", "x"], tmp.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn eval_highlights_canonical_metric() {
    let tmp = TempDir::new().unwrap();
    toy_data(tmp.path());
    for (id, canonical) in [("TOY", "accuracy_top1"), ("RS", "roc_auc_macro"), ("US8", "f1_aggregated")] {
        let manifest = if id == "TOY" { "d/test.tsv".to_string() } else { retag(tmp.path(), id) };
        let out_dir = format!("b_{id}");
        ok(&["build", "--manifest", &manifest, "--criterion", "PSH-L1", "--out", &out_dir], tmp.path());
        let labels = benchmark_labels(&tmp.path().join(&out_dir));
        let preds = tmp.path().join(format!("{id}.preds"));
        write_predictions(&preds, &labels, 4, true);
        let report = ok(&["eval", "--predictions", preds.to_str().unwrap(), "--benchmark", &out_dir], tmp.path());
        assert_eq!(value(&report, "canonical"), canonical);
        assert_eq!(value(&report, &format!("{canonical}*")), "1.000000");
    }
}

#[test]
fn eval_rejects_mismatches() {
    let tmp = TempDir::new().unwrap();
    toy_data(tmp.path());
    ok(&["build", "--manifest", "d/test.tsv", "--criterion", "WHN-L1", "--out", "b"], tmp.path());
    let labels = benchmark_labels(&tmp.path().join("b"));
    let preds = tmp.path().join("short.preds");
    write_predictions(&preds, &labels[..labels.len() - 1], 4, true);
    let o = run(&["eval", "--predictions", "short.preds", "--benchmark", "b"], tmp.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("rows"));

    write_predictions(&preds, &labels, 5, true);
    let o = run(&["eval", "--predictions", "short.preds", "--benchmark", "b"], tmp.path());
    assert_eq!(code(&o), 2);

    write_predictions(&preds, &labels, 4, false);
    let o = run(&["eval", "--predictions", "short.preds", "--benchmark", "b", "--metric", "bogus"], tmp.path());
    assert_eq!(code(&o), 2);
    let json = ok(&["eval", "--predictions", "short.preds", "--benchmark", "b", "--json"], tmp.path());
    assert!(json.contains("\"canonical\": \"accuracy_top1\""));
}

#[test]
fn split_modes() {
    let tmp = TempDir::new().unwrap();
    toy_data(tmp.path());
    let out = ok(&["split", "--manifest", "d/train.tsv", "--train-frac", "0.75", "--seed", "3", "--out", "s"], tmp.path());
    assert_eq!(out.trim(), "train=36 test=12");
    let again = ok(&["split", "--manifest", "d/train.tsv", "--train-frac", "0.75", "--seed", "3", "--out", "s2"], tmp.path());
    assert_eq!(out, again);
    let a = std::fs::read_to_string(tmp.path().join("s/train.tsv")).unwrap();
    let b = std::fs::read_to_string(tmp.path().join("s2/train.tsv")).unwrap();
    assert_eq!(a, b);
    ok(&["build", "--manifest", "s/test.tsv", "--criterion", "WHN-L1", "--out", "from_split"], tmp.path());

    let text = std::fs::read_to_string(tmp.path().join("d/train.tsv")).unwrap();
    let mut lines = text.lines();
    let mut folded = format!("{}\n", lines.next().unwrap().replacen("dataset=TOY", "dataset=US8", 1));
    for (i, l) in lines.enumerate() {
        let mut cols: Vec<String> = l.split('\t').map(str::to_string).collect();
        cols[3] = ((i % 10) + 1).to_string();
        folded.push_str(&cols.join("\t"));
        folded.push('\n');
    }
    std::fs::write(tmp.path().join("d/folded.tsv"), folded).unwrap();
    let out = ok(
        &["split", "--manifest", "d/folded.tsv", "--train-folds", "1-7", "--test-folds", "8-10", "--out", "f"],
        tmp.path(),
    );
    assert_eq!(out.trim(), "train=35 test=13");
    let o = run(&["split", "--manifest", "d/folded.tsv", "--train-folds", "1-7", "--test-folds", "7-10"], tmp.path());
    assert_eq!(code(&o), 2);
    let o = run(&["split", "--manifest", "d/train.tsv", "--train-folds", "1-7", "--test-folds", "8-10"], tmp.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn toy_pipeline_artifacts() {
    let tmp = TempDir::new().unwrap();
    let d = toy_data(tmp.path());
    let first = std::fs::read(d.join("train.tsv")).unwrap();
    ok(&["toy", "gen", "--out", "d2", "--train-per-class", "12", "--test-per-class", "6"], tmp.path());
    assert_eq!(first, std::fs::read(tmp.path().join("d2/train.tsv")).unwrap());

    let out = ok(&["toy", "train", "--data", "d", "--out", "m", "--epochs", "4"], tmp.path());
    assert!(value(&out, "clean_top1").parse::<f64>().unwrap() > 0.5);
    assert_eq!(std::fs::read_to_string(tmp.path().join("m/train_losses.tsv")).unwrap().lines().count(), 5);

    let args = ["toy", "adapt", "--data", "d", "--checkpoint", "m/model.ckpt", "--out", "a", "--epochs", "3", "--batch-size", "8", "--allow-small-batch"];
    ok(&args, tmp.path());
    let curve = std::fs::read_to_string(tmp.path().join("a/curve.tsv")).unwrap();
    assert_eq!(curve.lines().count(), 1 + 4);
    assert!(curve.starts_with("epoch\taccuracy_top1\n0\t"));
    let cfg = std::fs::read_to_string(tmp.path().join("a/adapt_config.toml")).unwrap();
    for key in ["lambda = 1.0", "lr_ratio = 0.5", "momentum = 0.7", "eval_seed = 123456", "epochs = 3"] {
        assert!(cfg.contains(key), "{key} missing from\n{cfg}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("a/report.json")).unwrap()).unwrap();
    assert!(report["silhouette_after"].is_number());

    ok(&args, tmp.path());
    assert_eq!(curve, std::fs::read_to_string(tmp.path().join("a/curve.tsv")).unwrap());

    let sil = ok(&["silhouette", "--embeddings", "a/embeddings_after.tsv"], tmp.path());
    let s: f64 = value(&sil, "silhouette").parse().unwrap();
    let expected = report["silhouette_after"].as_f64().unwrap();
    assert!((s - expected).abs() < 1e-5, "{s} vs {expected}");

    let o = run(&["toy", "adapt", "--data", "d", "--checkpoint", "m/model.ckpt", "--out", "a2", "--batch-size", "8"], tmp.path());
    assert_eq!(code(&o), 2);
    assert!(!tmp.path().join("a2").exists());
}

#[test]
fn toy_stability_outputs() {
    let tmp = TempDir::new().unwrap();
    toy_data(tmp.path());
    ok(&["toy", "train", "--data", "d", "--out", "m", "--epochs", "3"], tmp.path());
    for (axis, labels) in [("momentum", ["HM", "LM"]), ("lr-ratio", ["SLR", "BLR"])] {
        let out_dir = format!("s_{axis}");
        let args = [
            "toy", "stability", "--axis", axis, "--data", "d", "--checkpoint", "m/model.ckpt", "--out", &out_dir,
            "--epochs", "2", "--batch-size", "8", "--allow-small-batch",
        ];
        ok(&args, tmp.path());
        let dir = tmp.path().join(&out_dir);
        for l in labels {
            let curve = std::fs::read_to_string(dir.join(format!("curve_{l}.tsv"))).unwrap();
            assert_eq!(curve.lines().count(), 1 + 3);
        }
        let summary = std::fs::read_to_string(dir.join("summary.tsv")).unwrap();
        let rows: Vec<&str> = summary.lines().skip(1).collect();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].starts_with(labels[0]) && rows[1].starts_with(labels[1]));
        assert!(std::fs::read_to_string(dir.join("stability_config.toml")).unwrap().contains(&format!("axis = \"{axis}\"")));
    }
    let o = run(&["toy", "stability", "--axis", "sideways", "--data", "d", "--checkpoint", "m/model.ckpt", "--out", "x"], tmp.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn data_root_resolves_inputs() {
    let tmp = TempDir::new().unwrap();
    toy_data(tmp.path());
    let out = tmp.path().join("b");
    let o = bin()
        .args(["build", "--manifest", "d/test.tsv", "--criterion", "WHN-L1", "--out", out.to_str().unwrap()])
        .env("SHIFTBENCH_DATA_ROOT", tmp.path())
        .current_dir(std::env::temp_dir())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("benchmark.tsv").exists());
}

#[test]
fn validate_config_reports() {
    let tmp = TempDir::new().unwrap();
    let out = ok(&["validate-config"], tmp.path());
    assert!(out.contains("\"passed\": true"));
    std::fs::write(tmp.path().join("bad.toml"), "version = 99\n").unwrap();
    let o = run(&["validate-config", "--tables", "bad.toml"], tmp.path());
    assert_eq!(code(&o), 2);
}
