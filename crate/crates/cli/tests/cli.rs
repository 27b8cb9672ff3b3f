use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tiny_tsm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tiny-tsm")).args(args).output().expect("binary runs")
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn help_exits_zero() {
    for sub in ["evaluate", "generate", "train", "forecast", "param-count"] {
        let out = tiny_tsm(&[sub, "--help"]);
        assert!(out.status.success(), "{sub} --help failed");
        assert!(String::from_utf8_lossy(&out.stdout).contains("--seed"));
    }
}

#[test]
fn unknown_subcommand_fails() {
    assert!(!tiny_tsm(&["frobnicate"]).status.success());
}

#[test]
fn invalid_config_reports_pointer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "eval.json",
        r#"{"tasks": [{"holdout": {"kind": "seasonal", "n": "three", "context": 64, "horizon": 8}}]}"#,
    );
    let out = tiny_tsm(&["evaluate", "--config", &cfg, "--out", &p(dir.path(), "o")]);
    assert!(!out.status.success());
    let err = stderr_json(&out);
    assert_eq!(err["kind"], "invalid_config");
    assert_eq!(err["path"], "/tasks/0/holdout/n");

    let cfg = write(dir.path(), "train.json", r#"{"train": {"batch_size": 2, "lr": 0.1}, "data": {"synthetic": {}}}"#);
    let out = tiny_tsm(&["train", "--config", &cfg, "--out", &p(dir.path(), "m.ckpt")]);
    assert!(!out.status.success());
    let err = stderr_json(&out);
    assert_eq!(err["path"], "/train/lr");

    let cfg = write(dir.path(), "v.json", r#"{"schema_version": 2, "model": {"preset": "toy"}}"#);
    let out = tiny_tsm(&["param-count", "--config", &cfg]);
    assert!(!out.status.success());
    assert_eq!(stderr_json(&out)["path"], "/schema_version");
}

#[test]
fn param_count_matches_library() {
    let out = tiny_tsm(&["param-count", "--preset", "toy"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let want = tiny_tsm::model::param_count(&tiny_tsm::model::ModelConfig::toy());
    assert_eq!(v["total"].as_u64().unwrap() as usize, want);
    let sum: u64 = v["breakdown"].as_object().unwrap().values().map(|x| x.as_u64().unwrap()).sum();
    assert_eq!(sum as usize, want);
}

#[test]
fn baseline_evaluation_is_parity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "eval.json",
        r#"{"schema_version": 1, "baseline_only": true,
            "tasks": [{"holdout": {"kind": "mixed", "n": 4, "context": 96, "horizon": 12}}]}"#,
    );
    let out = tiny_tsm(&["evaluate", "--config", &cfg, "--out", &p(dir.path(), "rep")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["mean_rel_mse"], 1.0);
    assert!(dir.path().join("rep/report.csv").exists());
    assert!(dir.path().join("rep/rel_mse_by_class.svg").exists());
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn same_seed_same_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let gen = write(
        d,
        "gen.json",
        r#"{"n_series": 3, "batch": {"seq_len": 160}, "augmentation": {"max_channels": 2, "calendar_features": false}}"#,
    );
    for run in ["a", "b"] {
        let out = tiny_tsm(&["generate", "--config", &gen, "--out", &p(d, &format!("gen_{run}")), "--seed", "11"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = read_dir_sorted(&d.join("gen_a"));
    assert!(a.len() >= 4);
    assert_eq!(a, read_dir_sorted(&d.join("gen_b")));
    let out = tiny_tsm(&["generate", "--config", &gen, "--out", &p(d, "gen_c"), "--seed", "12"]);
    assert!(out.status.success());
    assert_ne!(a, read_dir_sorted(&d.join("gen_c")));

    let model = r#"{"custom": {"patch_len": 8, "hidden_size": 16, "n_temporal_layers": 2, "n_spatial_layers": 1,
        "n_heads": 2, "ffn_mult": 2.0, "max_context": 128, "max_horizon": 16, "n_pad_tokens": 2,
        "head_horizon_per_patch": 8, "head_rank": 4, "cross_dim": 4}}"#;
    let train = write(
        d,
        "train.json",
        &format!(
            r#"{{"model": {model}, "train": {{"batch_size": 2, "steps": 3, "context_len": 64, "max_horizon": 16}},
                "data": {{"files": {{"paths": ["{}"]}}}}}}"#,
            p(d, "gen_a/series_00000.json")
        ),
    );
    for run in ["a", "b"] {
        let out = tiny_tsm(&["train", "--config", &train, "--out", &p(d, &format!("m_{run}.ckpt")), "--seed", "5"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(fs::read(d.join("m_a.ckpt")).unwrap(), fs::read(d.join("m_b.ckpt")).unwrap());
    let curve = |r: &str| {
        fs::read_to_string(d.join(format!("m_{r}.loss.csv")))
            .unwrap()
            .lines()
            .map(|l| {
                let mut cols: Vec<String> = l.split(',').map(String::from).collect();
                cols.remove(1); // wall_ms
                cols
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(curve("a"), curve("b"));

    let fc = write(d, "fc.json", r#"{"inference": {"use_mirror": true, "noise_ensembles": 2}}"#);
    let input = p(d, "gen_a/series_00001.json");
    for run in ["a", "b"] {
        let out = tiny_tsm(&[
            "forecast", "--checkpoint", &p(d, "m_a.ckpt"), "--input", &input, "--horizon", "10",
            "--out", &p(d, &format!("f_{run}.csv")), "--config", &fc, "--seed", "3",
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(fs::read(d.join("f_a.csv")).unwrap(), fs::read(d.join("f_b.csv")).unwrap());
    let prov: serde_json::Value = serde_json::from_slice(&fs::read(d.join("f_a.provenance.json")).unwrap()).unwrap();
    assert_eq!(prov["provenance"]["ensemble_order"], "noise(mirror(model))");
    assert_eq!(fs::read_to_string(d.join("f_a.csv")).unwrap().lines().count(), 11);
}
