//! Runs the `wtasnn` binary end to end.

use std::path::Path;
use std::process::{Command, Output};

fn wtasnn(args: &[&str], data_root: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_wtasnn"));
    cmd.args(args).env("RUST_LOG", "warn").env_remove("WTASNN_DATA_ROOT");
    if let Some(root) = data_root {
        cmd.env("WTASNN_DATA_ROOT", root);
    }
    cmd.output().expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

#[test]
fn synth_train_eval_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let data = format!("{d}/data");
    let out = wtasnn(&["synth", "--out-dir", &data, "--n-train", "40", "--n-test", "10", "--steps", "20"], None);
    assert!(out.status.success(), "{}", text(&out.stderr));
    for f in ["train.toml", "test.toml", "wta.toml", "unsigned.toml", "per_sign.toml", "train/000000.txt"] {
        assert!(Path::new(&data).join(f).exists(), "{f}");
    }

    let run = format!("{d}/run");
    let out = wtasnn(&["train", "--config", &format!("{data}/wta.toml"), "--seed", "4", "--out-dir", &run], None);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("seed = 4"), "{stdout}");
    assert!(stdout.contains("eta = 0.00625"), "{stdout}");
    let metrics = std::fs::read_to_string(format!("{run}/metrics.csv")).unwrap();
    assert!(metrics.starts_with("epoch,example,mean_reward,hidden_rate,train_acc,test_acc\n"));

    let cp = format!("{run}/checkpoint.json");
    let eval = |seed: &str| wtasnn(&["eval", "--checkpoint", &cp, "--manifest", &format!("{data}/test.toml"), "--seed", seed], None);
    let a = eval("1");
    assert!(a.status.success(), "{}", text(&a.stderr));
    assert!(text(&a.stdout).starts_with("accuracy "));
    assert!(text(&a.stdout).contains("class   1"));
    assert_eq!(a.stdout, eval("1").stdout);

    let out = wtasnn(&["inspect", "--checkpoint", &cp], None);
    assert!(out.status.success());
    assert!(text(&out.stdout).contains("examples      40"));
}

#[test]
fn data_root_resolves_relative_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert!(wtasnn(&["synth", "--out-dir", data.to_str().unwrap(), "--n-train", "4", "--n-test", "2", "--steps", "10"], None)
        .status
        .success());
    let cfg = dir.path().join("elsewhere.toml");
    std::fs::write(&cfg, "epochs = 1\n[network]\nhidden = 1\n[data]\ntrain_manifest = \"train.toml\"\n").unwrap();
    let out_dir = dir.path().join("o");
    let args = ["train", "--config", cfg.to_str().unwrap(), "--out-dir", out_dir.to_str().unwrap()];
    assert_eq!(wtasnn(&args, None).status.code(), Some(3));
    let out = wtasnn(&args, Some(&data));
    assert!(out.status.success(), "{}", text(&out.stderr));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[learner]\nunknown_key = 1\n").unwrap();
    let o = dir.path().join("o");
    assert_eq!(wtasnn(&["train", "--config", bad.to_str().unwrap(), "--out-dir", o.to_str().unwrap()], None).status.code(), Some(2));
    let out = wtasnn(&["eval", "--checkpoint", "/nonexistent.json", "--manifest", "/nonexistent.toml"], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).starts_with("error: "));
}

#[test]
fn gradcheck_reports_each_suite() {
    let out = wtasnn(&["gradcheck", "--networks", "5", "--samples", "20000"], None);
    assert!(out.status.success(), "{}", text(&out.stdout));
    let stdout = text(&out.stdout);
    for suite in ["fd", "enumeration", "mc(T=2)", "mc(T=6)"] {
        assert!(stdout.lines().any(|l| l.starts_with(suite) && l.contains("PASS") && l.contains("worst: ")), "{stdout}");
    }
}
