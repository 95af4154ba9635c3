//! Runs the built binary end to end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gccrop(dir: &Path, args: &[&str], config: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gccrop"));
    cmd.current_dir(dir).env_remove("GCCROP_CONFIG").args(args);
    if let Some(c) = config {
        let p = dir.join("config.json");
        fs::write(&p, c).unwrap();
        cmd.env("GCCROP_CONFIG", p);
    }
    cmd.output().unwrap()
}

fn rects(dir: &Path) -> Vec<Value> {
    let v: Value = serde_json::from_slice(&fs::read(dir.join("rects.json")).unwrap()).unwrap();
    v.as_array().unwrap().clone()
}

#[test]
fn gcc_zero_alpha_gives_identical_rects() {
    let t = tempfile::tempdir().unwrap();
    let out = gccrop(
        t.path(),
        &[
            "demo-crops",
            "--method",
            "gcc",
            "--alpha",
            "0",
            "--out",
            "o",
        ],
        None,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = rects(&t.path().join("o"));
    assert_eq!(r.len(), 2);
    assert_eq!(r[0], r[1]);
    for key in ["left", "top", "width", "height"] {
        assert!(r[0].get(key).is_some());
    }
    assert_eq!(
        fs::read(t.path().join("o/view_0.ppm")).unwrap(),
        fs::read(t.path().join("o/view_1.ppm")).unwrap()
    );
}

#[test]
fn cgcc_rects_in_bounds_on_ppm_input() {
    let t = tempfile::tempdir().unwrap();
    // 20x12 gradient image
    let mut ppm = b"P6\n20 12\n255\n".to_vec();
    for i in 0..20 * 12 * 3 {
        ppm.push((i % 251) as u8);
    }
    fs::write(t.path().join("in.ppm"), &ppm).unwrap();
    let cfg = r#"{"cropper": {"method": "CGCC", "alpha": 3.0, "crop_size": 0.5, "n_views": 6}}"#;
    let out = gccrop(
        t.path(),
        &["demo-crops", "--image", "in.ppm", "--out", "o"],
        Some(cfg),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = rects(&t.path().join("o"));
    assert_eq!(r.len(), 6);
    for v in r {
        let g = |k: &str| v[k].as_i64().unwrap();
        assert!(
            g("left") >= 0
                && g("top") >= 0
                && g("left") + g("width") <= 20
                && g("top") + g("height") <= 12
        );
    }
    assert_eq!(fs::read(t.path().join("o/source.ppm")).unwrap(), ppm);
}

#[test]
fn fixed_seed_reproduces_output_bytes() {
    let t = tempfile::tempdir().unwrap();
    for dir in ["a", "b"] {
        let out = gccrop(
            t.path(),
            &[
                "demo-crops",
                "--method",
                "mgcc",
                "--seed",
                "42",
                "--out",
                dir,
            ],
            None,
        );
        assert!(out.status.success());
        let out = gccrop(
            t.path(),
            &["stats", "--seed", "42", "--out", dir],
            Some(r#"{"analysis": {"n_samples": 2000}}"#),
        );
        assert!(out.status.success());
    }
    let mut names: Vec<_> = fs::read_dir(t.path().join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 5);
    for n in names {
        assert_eq!(
            fs::read(t.path().join("a").join(&n)).unwrap(),
            fs::read(t.path().join("b").join(&n)).unwrap()
        );
    }
    let other = gccrop(
        t.path(),
        &[
            "demo-crops",
            "--method",
            "mgcc",
            "--seed",
            "43",
            "--out",
            "c",
        ],
        None,
    );
    assert!(other.status.success());
    assert_ne!(
        fs::read(t.path().join("a/rects.json")).unwrap(),
        fs::read(t.path().join("c/rects.json")).unwrap()
    );
}

#[test]
fn invalid_config_reports_every_field_and_writes_nothing() {
    let t = tempfile::tempdir().unwrap();
    let cfg = r#"{"cropper": {"alpha": -0.5, "uniform_bounds": [0.8, 0.2]},
                  "train": {"tau": 0, "batch_size": 1},
                  "dataset": {"source": {"synthetic": {"class_count": 1}}}}"#;
    let out = gccrop(t.path(), &["pretrain", "--out", "o"], Some(cfg));
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for field in [
        "cropper.alpha",
        "cropper.uniform_bounds",
        "train.tau",
        "train.batch_size",
        "dataset.source.synthetic.class_count",
    ] {
        assert!(
            err.contains(&format!("invalid {field}")),
            "missing {field} in {err}"
        );
    }
    assert!(!t.path().join("o").exists());

    let out = gccrop(t.path(), &["stats", "--alpha=-1", "--out", "o"], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(!t.path().join("o").exists());

    let out = gccrop(
        t.path(),
        &["stats", "--out", "o"],
        Some(r#"{"cropper": {"alpah": 1}}"#),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpah"));
}

#[test]
fn missing_inputs_are_validation_errors() {
    let t = tempfile::tempdir().unwrap();
    let out = gccrop(
        t.path(),
        &["linear-eval", "--encoder", "nope.json", "--out", "o"],
        None,
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid encoder"));
    let cfg = r#"{"dataset": {"source": {"cifar10_bin": {"path": "data_batch_1.bin"}}}}"#;
    let out = gccrop(t.path(), &["pretrain", "--out", "o"], Some(cfg));
    assert_eq!(out.status.code(), Some(2));
    assert!(!t.path().join("o").exists());
}

#[test]
fn pretrain_then_linear_eval() {
    let t = tempfile::tempdir().unwrap();
    let cfg = r#"{
        "dataset": {"train_size": 200, "test_size": 100,
                    "source": {"synthetic": {"dims": {"width": 16, "height": 16}}}},
        "train": {"epochs": 3, "batch_size": 32, "hidden": [32], "embedding_dim": 8},
        "lep": {"epochs": 20}
    }"#;
    let out = gccrop(
        t.path(),
        &[
            "pretrain", "--out", "o", "--method", "cgcc", "--alpha", "0.3",
        ],
        Some(cfg),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let curve = fs::read_to_string(t.path().join("o/loss_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 4);
    assert!(curve.starts_with("epoch,loss\n"));

    let out = gccrop(
        t.path(),
        &["linear-eval", "--encoder", "o/encoder.json", "--out", "o"],
        Some(cfg),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let trained: Value =
        serde_json::from_slice(&fs::read(t.path().join("o/linear_eval.json")).unwrap()).unwrap();

    let out = gccrop(t.path(), &["linear-eval", "--out", "u"], Some(cfg));
    assert!(out.status.success());
    let untrained: Value =
        serde_json::from_slice(&fs::read(t.path().join("u/linear_eval.json")).unwrap()).unwrap();
    assert_eq!(untrained["encoder"], Value::Null);
    assert_eq!(untrained["chance_accuracy"], 0.25);
    for r in [&trained, &untrained] {
        let acc = r["test_accuracy"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&acc));
    }
}

#[test]
fn encoder_for_other_view_size_is_rejected() {
    let t = tempfile::tempdir().unwrap();
    let cfg = r#"{"dataset": {"train_size": 40, "test_size": 20,
                  "source": {"synthetic": {"dims": {"width": 16, "height": 16}}}},
                  "train": {"epochs": 1, "batch_size": 16, "hidden": [8], "embedding_dim": 4}}"#;
    assert!(gccrop(t.path(), &["pretrain", "--out", "o"], Some(cfg))
        .status
        .success());
    let other = cfg.replace(
        "\"width\": 16, \"height\": 16",
        "\"width\": 20, \"height\": 20",
    );
    let out = gccrop(
        t.path(),
        &["linear-eval", "--encoder", "o/encoder.json", "--out", "e"],
        Some(&other),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("expects"));
    assert!(!t.path().join("e").exists());
}
