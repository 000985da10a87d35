use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn itfc(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_itfc"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn small_pipeline_config(dir: &Path) -> std::path::PathBuf {
    let cfg = serde_json::json!({
        "dataset": {
            "group": "z2",
            "template": {"cells": 4, "bins": 2},
            "classes": 2,
            "samples_per_class": 6,
            "test_samples_per_class": 3,
            "descriptors_per_sample": 5,
            "class_signal": 1.0,
            "pose_bias": 1.0,
            "noise": 0.3,
            "seed": 2
        },
        "pca_dim": 4,
        "clusters": 2
    });
    let path = dir.join("pipeline.json");
    fs::write(&path, serde_json::to_vec(&cfg).unwrap()).unwrap();
    path
}

#[test]
fn staged_commands_chain_together() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path();
    let p = |name: &str| o.join(name).to_string_lossy().into_owned();
    let synth = itfc(
        o,
        &[
            "--seed",
            "4",
            "synth",
            "--group",
            "d4",
            "--template",
            "4x4",
            "--classes",
            "2",
        ],
    );
    assert_eq!(
        code(&synth),
        0,
        "{}",
        String::from_utf8_lossy(&synth.stderr)
    );
    assert_eq!(
        code(&itfc(
            o,
            &[
                "pca",
                "--input",
                &p("train.itfc"),
                "--dim",
                "6",
                "--apply",
                &p("test.itfc")
            ]
        )),
        0
    );
    assert_eq!(
        code(&itfc(
            o,
            &[
                "kmeans",
                "--input",
                &p("train.proj.itfc"),
                "--clusters",
                "2"
            ]
        )),
        0
    );
    for split in ["train", "test"] {
        let input = p(&format!("{split}.proj.itfc"));
        let enc = itfc(
            o,
            &[
                "encode",
                "--input",
                &input,
                "--method",
                "inv_vlad",
                "--codebook",
                &p("codebook.json"),
            ],
        );
        assert_eq!(code(&enc), 0, "{}", String::from_utf8_lossy(&enc.stderr));
    }
    assert_eq!(
        code(&itfc(
            o,
            &[
                "train",
                "--input",
                &p("train.proj.inv_vlad.itfc"),
                "--loss",
                "logistic"
            ]
        )),
        0
    );
    let eval = itfc(
        o,
        &[
            "evaluate",
            "--model",
            &p("model.json"),
            "--input",
            &p("test.proj.inv_vlad.itfc"),
        ],
    );
    assert_eq!(code(&eval), 0);
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(o.join("evaluation.json")).unwrap()).unwrap();
    let acc = report["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
}

#[test]
fn synth_is_deterministic_under_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        assert_eq!(
            code(&itfc(d.path(), &["--seed", "11", "synth", "--group", "d6"])),
            0
        );
    }
    for f in ["train.itfc", "test.itfc", "train.itfc.json"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn pipeline_report_ignores_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_pipeline_config(dir.path());
    let mut reports = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("run{threads}"));
        let o = itfc(
            &out,
            &[
                "--threads",
                threads,
                "--config",
                cfg.to_str().unwrap(),
                "pipeline",
            ],
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let mut r: serde_json::Value =
            serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
        r.as_object_mut().unwrap().remove("timings");
        reports.push(r);
        assert!(fs::read(out.join("inv_bp_test.itfc")).unwrap().len() > 21);
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path();
    // validation failure
    assert_eq!(code(&itfc(o, &["selftest", "--inject-fault"])), 1);
    // I/O error
    assert_eq!(
        code(&itfc(o, &["train", "--input", "/definitely/missing.itfc"])),
        2
    );
    // config errors: usage, malformed config, unknown tag
    assert_eq!(code(&itfc(o, &["--bogus-flag", "selftest"])), 3);
    let bad = o.join("bad.json");
    fs::write(&bad, b"{\"dataset\": 5}").unwrap();
    assert_eq!(
        code(&itfc(o, &["--config", bad.to_str().unwrap(), "pipeline"])),
        3
    );
    assert_eq!(code(&itfc(o, &["decompose", "--group", "d5"])), 3);
    let cfg = small_pipeline_config(o);
    let mut v: serde_json::Value = serde_json::from_slice(&fs::read(&cfg).unwrap()).unwrap();
    v["methods"] = serde_json::json!(["bp", "fisher"]);
    fs::write(&cfg, serde_json::to_vec(&v).unwrap()).unwrap();
    let run = itfc(o, &["--config", cfg.to_str().unwrap(), "pipeline"]);
    assert_eq!(code(&run), 3);
    assert!(String::from_utf8_lossy(&run.stderr).contains("encode"));
}

#[test]
fn decompose_reports_the_expected_multiplicities() {
    let dir = tempfile::tempdir().unwrap();
    let o = itfc(
        dir.path(),
        &["decompose", "--group", "d4", "--template", "16x8"],
    );
    assert_eq!(code(&o), 0);
    let doc: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("decomposition.json")).unwrap()).unwrap();
    assert_eq!(
        doc["multiplicities"],
        serde_json::json!([18, 14, 14, 18, 32])
    );
    assert_eq!(
        doc["reference_table_disagreements"]
            .as_array()
            .unwrap()
            .len(),
        4
    );
}

#[test]
fn pristine_selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = itfc(dir.path(), &["selftest"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("all checks passed"));
}
