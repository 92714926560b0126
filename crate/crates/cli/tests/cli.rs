use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use csa_core::corpus::save_native_jsonl;
use csa_core::synthetic::lexical_overlap_dataset;
use csa_core::tensor::Precision;
use csa_core::{ModelConfig, TrainConfig};

fn csa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csa"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn csa")
}

fn ok(args: &[&str]) -> String {
    let out = csa(args);
    assert!(
        out.status.success(),
        "csa {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn data_dir(dir: &Path) -> PathBuf {
    let data = dir.join("data");
    fs::create_dir(&data).unwrap();
    save_native_jsonl(&data.join("train.jsonl"), &lexical_overlap_dataset(24, 3, 11)).unwrap();
    save_native_jsonl(&data.join("dev.jsonl"), &lexical_overlap_dataset(10, 3, 12)).unwrap();
    data
}

fn config_file(dir: &Path, precision: Precision, contextual_dim: usize) -> PathBuf {
    let cfg = TrainConfig {
        model: ModelConfig {
            contextual_dim,
            ..ModelConfig::micro()
        },
        lr: 5e-3,
        batch_size: 8,
        max_epochs: 2,
        patience: 2,
        precision,
        ..Default::default()
    };
    let path = dir.join(format!("{precision:?}-{contextual_dim}.toml"));
    fs::write(&path, cfg.to_toml().unwrap()).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn train_eval_ensemble_and_dump() {
    let tmp = tempfile::tempdir().unwrap();
    let data = data_dir(tmp.path());
    let cfg = config_file(tmp.path(), Precision::F64, 0);
    let a = tmp.path().join("a.ckpt");
    let b = tmp.path().join("b.ckpt");
    ok(&["train", "--config", s(&cfg), "--data", s(&data), "--out", s(&a), "--seed", "1"]);
    ok(&["train", "--config", s(&cfg), "--data", s(&data), "--out", s(&b), "--seed", "2"]);

    let metrics = fs::read_to_string(tmp.path().join("a.ckpt.metrics.jsonl")).unwrap();
    assert!(!metrics.trim().is_empty());
    for line in metrics.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v.get("epoch").is_some(), "{line}");
    }

    let eval: serde_json::Value =
        serde_json::from_str(&ok(&["eval", "--ckpt", s(&a), "--data", s(&data), "--json", "--breakdown"])).unwrap();
    assert_eq!(eval["data"], "dev");
    assert_eq!(eval["total"], 10);
    let acc = eval["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    let by_type = eval["by_qtype"].as_array().unwrap();
    assert_eq!(by_type.iter().map(|q| q["n"].as_u64().unwrap()).sum::<u64>(), 10);

    let text = ok(&["eval", "--ckpt", s(&a), "--data", s(&data), "--split", "train"]);
    assert!(text.starts_with("train: accuracy"), "{text}");

    // A single-member ensemble reproduces the member.
    let solo: serde_json::Value =
        serde_json::from_str(&ok(&["ensemble", "--ckpts", s(&a), "--data", s(&data), "--json"])).unwrap();
    assert_eq!(solo["correct"], eval["correct"]);
    let pair: serde_json::Value = serde_json::from_str(&ok(&[
        "ensemble", "--ckpts", s(&a), s(&b), "--data", s(&data), "--json",
    ]))
    .unwrap();
    assert_eq!(pair["total"], 10);

    let id = lexical_overlap_dataset(10, 3, 12)[3].id.clone();
    let cube = tmp.path().join("cube.jsonl");
    ok(&["dump-cube", "--ckpt", s(&a), "--instance-id", &id, "--data", s(&data), "--out", s(&cube)]);
    let lines: Vec<serde_json::Value> = fs::read_to_string(&cube)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    let micro = ModelConfig::micro();
    let total: f64 = lines.iter().map(|l| l["probability"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);
    for (c, l) in lines.iter().enumerate() {
        assert_eq!(l["id"], id.as_str());
        assert_eq!(l["candidate"], c);
        let shape: Vec<usize> = l["shape"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap() as usize).collect();
        assert_eq!(shape, [micro.cube_channels(), micro.candidate_len, micro.question_len]);
        assert_eq!(l["cube"].as_array().unwrap().len(), shape[0]);
    }

    let missing = csa(&["dump-cube", "--ckpt", s(&a), "--instance-id", "nope", "--data", s(&data)]);
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope"));
}

#[test]
fn f32_checkpoints_and_contextual_vectors() {
    let tmp = tempfile::tempdir().unwrap();
    let data = data_dir(tmp.path());
    let es = 3;
    let mut lines = String::new();
    for inst in lexical_overlap_dataset(24, 3, 11).iter().chain(&lexical_overlap_dataset(10, 3, 12)) {
        let mut streams = vec![("passage".to_string(), inst.passage.len()), ("question".into(), inst.question.len())];
        for (i, c) in inst.candidates.iter().enumerate() {
            streams.push((format!("candidate:{i}"), c.len()));
        }
        for (stream, len) in streams {
            let vectors: Vec<Vec<f64>> = (0..len).map(|t| (0..es).map(|k| ((t + k) as f64).sin()).collect()).collect();
            lines += &serde_json::json!({ "id": inst.id, "stream": stream, "vectors": vectors }).to_string();
            lines.push('\n');
        }
    }
    fs::write(data.join("contextual.jsonl"), lines).unwrap();

    let cfg = config_file(tmp.path(), Precision::F32, es);
    let ckpt = tmp.path().join("m.ckpt");
    ok(&["train", "--config", s(&cfg), "--data", s(&data), "--out", s(&ckpt)]);
    let out = ok(&["eval", "--ckpt", s(&ckpt), "--data", s(&data), "--breakdown"]);
    assert!(out.starts_with("dev: accuracy"), "{out}");

    fs::remove_file(data.join("contextual.jsonl")).unwrap();
    let err = csa(&["eval", "--ckpt", s(&ckpt), "--data", s(&data)]);
    assert!(!err.status.success());
    assert!(String::from_utf8_lossy(&err.stderr).contains("contextual.jsonl"));
}

#[test]
fn gradcheck_tiny_passes() {
    let out = ok(&["gradcheck", "--config", "tiny", "--ablation", "no_enriched_representation"]);
    assert!(out.lines().any(|l| l.starts_with("ok ") && l.contains("head.")), "{out}");
    assert!(!out.contains("FAIL"), "{out}");
}

#[test]
fn bad_arguments_are_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let data = data_dir(tmp.path());
    let out = tmp.path().join("x.ckpt");
    let bad = csa(&["train", "--data", s(&data), "--out", s(&out), "--ablation", "no_such_thing"]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("no_such_thing"));

    let nodata = csa(&["train", "--data", s(&tmp.path().join("missing")), "--out", s(&out)]);
    assert!(!nodata.status.success());

    let nodev = tmp.path().join("nodev");
    fs::create_dir(&nodev).unwrap();
    fs::copy(data.join("train.jsonl"), nodev.join("train.jsonl")).unwrap();
    let r = csa(&["train", "--data", s(&nodev), "--out", s(&out)]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("dev"));
    assert!(!out.exists());
}
