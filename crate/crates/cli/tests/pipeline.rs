use std::path::Path;
use std::process::{Command, Output};

use linda_core::synthetic::{sentiment_dataset, to_tsv, toy_corpus};

const TINY: &[&str] = &[
    "--set", "model.d_model=8",
    "--set", "model.n_heads=2",
    "--set", "model.ffn_dim=16",
    "--set", "model.encoder_layers=1",
    "--set", "model.decoder_layers=1",
];

fn linda(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_linda"));
    cmd.args(args).env("RUST_LOG", "warn").env_remove("LINDA_OUTPUT_ROOT");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_data(dir: &Path) {
    std::fs::write(dir.join("corpus.txt"), toy_corpus(60, 0).join("\n")).unwrap();
    std::fs::write(dir.join("train.tsv"), to_tsv(&sentiment_dataset(12, 1))).unwrap();
}

fn train(dir: &Path, out: &str) -> Output {
    let corpus = dir.join("corpus.txt");
    let out = dir.join(out);
    let mut args = vec![
        "train",
        "--corpus",
        corpus.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--steps",
        "3",
        "--batch-size",
        "2",
    ];
    args.extend_from_slice(TINY);
    linda(&args, &[])
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    write_data(dir.path());
    assert!(train(dir.path(), "a").status.success());
    assert!(train(dir.path(), "b").status.success());
    for f in ["model.ckpt", "training_log.csv", "vocab.txt", "config.resolved.txt"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "train");
    assert_eq!(manifest["settings"]["training.steps"], "3");
    assert_eq!(manifest["checkpoint_hash"].as_str().unwrap().len(), 64);

    let ckpt = dir.path().join("a/model.ckpt");
    let data = dir.path().join("train.tsv");
    let augment = |out: &str| {
        let out = dir.path().join(out);
        linda(
            &[
                "augment",
                "--checkpoint",
                ckpt.to_str().unwrap(),
                "--data",
                data.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--strategy",
                "sample",
            ],
            &[],
        )
    };
    assert!(augment("x").status.success());
    assert!(augment("y").status.success());
    let x = std::fs::read(dir.path().join("x/augmented.jsonl")).unwrap();
    assert_eq!(x, std::fs::read(dir.path().join("y/augmented.jsonl")).unwrap());
    assert_eq!(String::from_utf8(x).unwrap().lines().count(), 12);
}

#[test]
fn missing_checkpoint_fails() {
    let dir = tempfile::tempdir().unwrap();
    write_data(dir.path());
    let out = linda(
        &[
            "augment",
            "--checkpoint",
            "/no/such.ckpt",
            "--data",
            dir.path().join("train.tsv").to_str().unwrap(),
            "--out",
            dir.path().join("o").to_str().unwrap(),
        ],
        &[],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such.ckpt"));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn alpha_range_is_checked() {
    let out = linda(
        &["interpolate", "--checkpoint", "c", "--a", "x", "--b", "y", "--alpha", "1.5"],
        &[],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("1.5"));
}

#[test]
fn output_root_applies_to_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    write_data(dir.path());
    let corpus = dir.path().join("corpus.txt");
    let mut args = vec!["train", "--corpus", corpus.to_str().unwrap(), "--out", "rel", "--steps", "1"];
    args.extend_from_slice(TINY);
    let out = linda(&args, &[("LINDA_OUTPUT_ROOT", dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("rel/model.ckpt").is_file());
    assert!(dir.path().join("rel/manifest.json").is_file());
}
