#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

pub const BIN: &str = env!("CARGO_BIN_EXE_cpodem");

pub fn cpodem(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env("CPODEM_THREADS", "1").output().expect("spawn cpodem")
}

pub fn ok(args: &[&str]) -> Output {
    let out = cpodem(args);
    assert!(out.status.success(), "cpodem {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

/// Ten-case temperature and density corpus on a coarse grid, trained into `root/model`.
pub fn small_model(root: &Path) -> std::path::PathBuf {
    let s = |p: &Path| p.to_str().expect("utf-8 path").to_string();
    let design = root.join("design.tsv");
    let corpus = root.join("corpus");
    let model = root.join("model");
    ok(&["doe", "--n", "10", "--seed", "3", "--out", &s(&design)]);
    ok(&[
        "simulate", "--design", &s(&design), "--out", &s(&corpus), "--nx", "24", "--nr", "18", "--steps", "8",
        "--variables", "temperature,density",
    ]);
    ok(&["train", "--corpus", &s(&corpus), "--out", &s(&model), "--nx", "24", "--nr", "18"]);
    model
}
