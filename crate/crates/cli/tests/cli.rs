mod common;

use std::fs;

use common::{cpodem, ok, small_model};

fn code(args: &[&str]) -> i32 {
    cpodem(args).status.code().expect("exit code")
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
    assert_eq!(code(&["train", "--help"]), 0);
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.tsv");
    let out = out.to_str().unwrap();
    assert_eq!(code(&["doe", "--n", "4", "--out", out, "--bogus"]), 1);
    assert_eq!(code(&["doe", "--n", "1", "--out", out]), 1);
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&["predict", "--model", "/nonexistent", "--design", "60,3,60,1,2"]), 1);
    assert_eq!(code(&["doe", "--n", "4", "--out", out]), 0);
    let threads = std::process::Command::new(common::BIN)
        .args(["doe", "--n", "4", "--out", out])
        .env("CPODEM_THREADS", "zero")
        .status()
        .unwrap();
    assert_eq!(threads.code(), Some(1));
}

#[test]
fn doe_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.tsv");
    let b = dir.path().join("b.tsv");
    ok(&["doe", "--n", "12", "--seed", "5", "--out", a.to_str().unwrap()]);
    ok(&["doe", "--n", "12", "--seed", "5", "--out", b.to_str().unwrap()]);
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let rows = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()).count();
    assert!(rows >= 12, "{text}");
}

#[test]
fn pipeline_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = small_model(&dir.path().join("a"));
    let b = small_model(&dir.path().join("b"));
    assert_eq!(fs::read(a.join("manifest.json")).unwrap(), fs::read(b.join("manifest.json")).unwrap());
    assert_eq!(
        cpodem_archive_hash(&a),
        cpodem_archive_hash(&b),
        "identical inputs must give byte-identical archives"
    );

    let design = "60,3.5,60,1.25,2.5";
    let p = ok(&["predict", "--model", a.to_str().unwrap(), "--design", design]);
    let summary: serde_json::Value = serde_json::from_slice(&p.stdout).unwrap();
    assert_eq!(summary["normalized"], serde_json::json!([0.5, 0.5, 0.5, 0.5, 0.5]));
    assert_eq!(summary["fields"]["nx"], 24);
    assert_eq!(summary["fields"]["steps"], 8);

    let normalized = ok(&["predict", "--model", a.to_str().unwrap(), "--design", "0.5,0.5,0.5,0.5,0.5", "--normalized"]);
    assert_eq!(p.stdout, normalized.stdout);

    let rejected = cpodem(&["predict", "--model", a.to_str().unwrap(), "--design", "200,3.5,60,1.25,2.5"]);
    assert_eq!(rejected.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&rejected.stderr).contains("`L`"));

    let c = ok(&["classify", "--tree", a.to_str().unwrap(), "--design", design]);
    let text = String::from_utf8(c.stdout).unwrap();
    assert!(text.starts_with("classification: "), "{text}");
    assert!(text.contains("rule 1:"), "{text}");
}

#[test]
fn predict_out_and_report_write_files() {
    let dir = tempfile::tempdir().unwrap();
    let model = small_model(dir.path());
    let m = model.to_str().unwrap();
    let row = fs::read_to_string(dir.path().join("design.tsv"))
        .unwrap()
        .lines()
        .find(|l| !l.starts_with('#') && !l.trim().is_empty())
        .unwrap()
        .replace('\t', ",");

    let case = dir.path().join("emulated");
    let p = ok(&["predict", "--model", m, "--design", &row, "--normalized", "--out", case.to_str().unwrap()]);
    let summary: serde_json::Value = serde_json::from_slice(&p.stdout).unwrap();
    assert_eq!(fs::read(case.join("summary.json")).unwrap(), p.stdout);
    for f in ["var_temperature.bin", "var_density.bin", "variance_temperature.bin", "variance_density.bin"] {
        assert!(case.join(f).is_file(), "{f}");
    }
    assert_eq!(summary["fields"]["variables"], serde_json::json!(["temperature", "density"]));

    // The first training case is its own reference: the emulator interpolates it.
    let report = dir.path().join("report");
    let truth = dir.path().join("corpus/case_000");
    ok(&["report", "--model", m, "--design", &row, "--normalized", "--truth", truth.to_str().unwrap(), "--out", report.to_str().unwrap()]);
    let rmsre = fs::read_to_string(report.join("rmsre.tsv")).unwrap();
    let overall: f64 = rmsre
        .lines()
        .find(|l| l.starts_with("temperature\toverall"))
        .and_then(|l| l.rsplit('\t').next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(overall < 2.0, "{rmsre}");
    let metrics = fs::read_to_string(report.join("metrics.tsv")).unwrap();
    assert!(metrics.lines().any(|l| l.starts_with("classification\t")), "{metrics}");
    assert!(report.join("psd_probe1.tsv").is_file());
    assert!(report.join("field_temperature.tsv").is_file());
}

fn cpodem_archive_hash(dir: &std::path::Path) -> String {
    cpodem::summary::archive_hash(dir).unwrap()
}
