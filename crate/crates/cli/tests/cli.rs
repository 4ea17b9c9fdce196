//! End-to-end tests of the `dicoh` binary: prepare -> perturb -> train ->
//! eval/score/inspect, plus exit-code and determinism contracts.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dicoh::corpus::synth;

fn dicoh_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dicoh"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(cmd: &mut Command) -> i32 {
    cmd.output().expect("binary runs").status.code().unwrap_or(-1)
}

/// Raw DailyDialog-style fixture written from the synthetic generator.
fn raw_fixture(dir: &Path, dialogues: usize, seed: u64) -> (PathBuf, PathBuf) {
    let cfg = synth::SynthConfig {
        dialogues,
        seed,
        ..Default::default()
    };
    let all = synth::generate(&cfg);
    let text = dir.join("dialogues.txt");
    let acts = dir.join("acts.txt");
    synth::write_raw_files(&all, &text, &acts).unwrap();
    (text, acts)
}

struct Pipeline {
    _tmp: tempfile::TempDir,
    corpus: PathBuf,
    pairs: PathBuf,
    train_dir: PathBuf,
}

/// Full tiny pipeline shared by the eval/score/inspect tests.
fn trained_pipeline() -> Pipeline {
    let tmp = tempfile::tempdir().unwrap();
    let (text, acts) = raw_fixture(tmp.path(), 15, 5);
    let corpus = tmp.path().join("corpus");
    run_ok(dicoh_bin().args([
        "prepare",
        "--text",
        text.to_str().unwrap(),
        "--acts",
        acts.to_str().unwrap(),
        "--seed",
        "1",
        "--out",
        corpus.to_str().unwrap(),
    ]));

    let pairs = tmp.path().join("pairs-uo");
    run_ok(dicoh_bin().args([
        "perturb",
        "--corpus",
        corpus.to_str().unwrap(),
        "--domain",
        "uo",
        "--per-dialogue",
        "4",
        "--seed",
        "1",
        "--out",
        pairs.to_str().unwrap(),
    ]));

    let train_dir = tmp.path().join("run");
    run_ok(dicoh_bin().args([
        "train",
        "--pairs",
        pairs.to_str().unwrap(),
        "--regime",
        "s-dicoh",
        "--epochs",
        "2",
        "--batch-size",
        "8",
        "--emb-dim",
        "8",
        "--utt-hidden",
        "4",
        "--dial-hidden",
        "4",
        "--n-max",
        "12",
        "--seed",
        "3",
        "--out",
        train_dir.to_str().unwrap(),
    ]));

    Pipeline {
        _tmp: tmp,
        corpus,
        pairs,
        train_dir,
    }
}

#[test]
fn prepare_rejects_missing_paths_with_exit_code_2() {
    let out = dicoh_bin()
        .args(["prepare", "--text", "/nonexistent/x.txt", "--acts", "/nonexistent/y.txt"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("/nonexistent/x.txt"), "{stderr}");
}

#[test]
fn prepare_writes_canonical_splits_and_stats() {
    let tmp = tempfile::tempdir().unwrap();
    let (text, acts) = raw_fixture(tmp.path(), 20, 7);
    let corpus = tmp.path().join("corpus");
    let out = run_ok(dicoh_bin().args([
        "prepare",
        "--text",
        text.to_str().unwrap(),
        "--acts",
        acts.to_str().unwrap(),
        "--seed",
        "1",
        "--out",
        corpus.to_str().unwrap(),
    ]));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("prepared 20 dialogues"), "{stdout}");

    for name in ["train.jsonl", "validation.jsonl", "test.jsonl", "labels.txt", "stats.json"] {
        assert!(corpus.join(name).exists(), "missing {name}");
    }
    let stats: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(corpus.join("stats.json")).unwrap()).unwrap();
    assert_eq!(stats["dialogues"], 20);

    // Rerun over identical inputs is byte-identical.
    let corpus2 = tmp.path().join("corpus2");
    run_ok(dicoh_bin().args([
        "prepare",
        "--text",
        text.to_str().unwrap(),
        "--acts",
        acts.to_str().unwrap(),
        "--seed",
        "1",
        "--out",
        corpus2.to_str().unwrap(),
    ]));
    for name in ["train.jsonl", "validation.jsonl", "test.jsonl", "stats.json"] {
        assert_eq!(
            std::fs::read(corpus.join(name)).unwrap(),
            std::fs::read(corpus2.join(name)).unwrap(),
            "{name} differs between identical runs"
        );
    }
}

#[test]
fn perturb_rejects_unknown_domains() {
    let tmp = tempfile::tempdir().unwrap();
    let out = dicoh_bin()
        .args([
            "perturb",
            "--corpus",
            tmp.path().to_str().unwrap(),
            "--domain",
            "bogus",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn perturb_writes_balanced_pair_files_and_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let (text, acts) = raw_fixture(tmp.path(), 15, 2);
    let corpus = tmp.path().join("corpus");
    run_ok(dicoh_bin().args([
        "prepare",
        "--text",
        text.to_str().unwrap(),
        "--acts",
        acts.to_str().unwrap(),
        "--out",
        corpus.to_str().unwrap(),
    ]));
    let pairs = tmp.path().join("pairs");
    run_ok(dicoh_bin().args([
        "perturb",
        "--corpus",
        corpus.to_str().unwrap(),
        "--domain",
        "euo",
        "--per-dialogue",
        "6",
        "--seed",
        "9",
        "--out",
        pairs.to_str().unwrap(),
    ]));

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(pairs.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["domain"], "euo");
    let train_pairs = dicoh::perturb::read_pairs(&pairs.join("train.pairs.jsonl")).unwrap();
    assert!(!train_pairs.is_empty());
    let zeros = train_pairs.iter().filter(|p| p.label == 0).count();
    assert_eq!(zeros * 2, train_pairs.len());
    assert_eq!(
        manifest["splits"][0]["pairs"].as_u64().unwrap() as usize,
        train_pairs.len()
    );
}

#[test]
fn train_writes_a_loadable_checkpoint_and_epoch_log() {
    let p = trained_pipeline();
    let log = std::fs::read_to_string(p.train_dir.join("epochs.log")).unwrap();
    assert_eq!(log.lines().count(), 2);
    assert!(log.contains("epoch=1 train_loss="), "{log}");
    assert!(p.train_dir.join("resolved.toml").exists());

    let ckpt = dicoh::train::Checkpoint::load(&p.train_dir.join("checkpoint.json")).unwrap();
    assert_eq!(ckpt.config.epochs, 2);
    let model = ckpt.rebuild_model().unwrap();
    assert_eq!(model.config.utt_hidden, 4);
}

#[test]
fn eval_reports_a_grid_and_rejects_empty_pair_files() {
    let p = trained_pipeline();

    // A second domain for a 1x2 grid.
    let pairs_ui = p.pairs.parent().unwrap().join("pairs-ui");
    run_ok(dicoh_bin().args([
        "perturb",
        "--corpus",
        p.corpus.to_str().unwrap(),
        "--domain",
        "ui",
        "--per-dialogue",
        "4",
        "--seed",
        "1",
        "--out",
        pairs_ui.to_str().unwrap(),
    ]));

    let eval_dir = p.pairs.parent().unwrap().join("eval");
    let out = run_ok(dicoh_bin().args([
        "eval",
        "--checkpoint",
        p.train_dir.join("checkpoint.json").to_str().unwrap(),
        "--pairs",
        p.pairs.join("test.pairs.jsonl").to_str().unwrap(),
        pairs_ui.join("test.pairs.jsonl").to_str().unwrap(),
        "--out",
        eval_dir.to_str().unwrap(),
    ]));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("uo:test"), "{stdout}");
    assert!(stdout.contains("ui:test"), "{stdout}");

    let reports: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(eval_dir.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 2);

    // An empty pair file is a usage error.
    let empty = p.pairs.parent().unwrap().join("empty.pairs.jsonl");
    std::fs::write(&empty, "").unwrap();
    let code = exit_code(dicoh_bin().args([
        "eval",
        "--checkpoint",
        p.train_dir.join("checkpoint.json").to_str().unwrap(),
        "--pairs",
        empty.to_str().unwrap(),
    ]));
    assert_eq!(code, 2);
}

#[test]
fn eval_random_baseline_needs_no_checkpoint() {
    let p = trained_pipeline();
    let out = run_ok(dicoh_bin().args([
        "eval",
        "--model",
        "random",
        "--seed",
        "11",
        "--pairs",
        p.pairs.join("test.pairs.jsonl").to_str().unwrap(),
        "--out",
        p.pairs.parent().unwrap().join("eval-random").to_str().unwrap(),
    ]));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("random"), "{stdout}");
}

#[test]
fn score_emits_one_record_per_dialogue() {
    let p = trained_pipeline();
    let out = run_ok(dicoh_bin().args([
        "score",
        "--checkpoint",
        p.train_dir.join("checkpoint.json").to_str().unwrap(),
        "--dialogues",
        p.corpus.join("test.jsonl").to_str().unwrap(),
    ]));
    let stdout = String::from_utf8_lossy(&out.stdout);
    let dialogues = dicoh::corpus::read_canonical(&p.corpus.join("test.jsonl")).unwrap();
    assert_eq!(stdout.lines().count(), dialogues.len());
    for line in stdout.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["score"].is_f64() || v["score"].is_i64());
        assert!(v["id"].is_string());
    }
}

#[test]
fn inspect_dumps_normalized_attention_and_rejects_unknown_ids() {
    let p = trained_pipeline();
    let dialogues = dicoh::corpus::read_canonical(&p.corpus.join("test.jsonl")).unwrap();
    let id = dialogues[0].id.clone();
    let out = run_ok(dicoh_bin().args([
        "inspect",
        "--checkpoint",
        p.train_dir.join("checkpoint.json").to_str().unwrap(),
        "--dialogues",
        p.corpus.join("test.jsonl").to_str().unwrap(),
        "--id",
        &id,
    ]));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().count(), 1);
    let report: serde_json::Value = serde_json::from_str(stdout.lines().next().unwrap()).unwrap();
    assert_eq!(report["dialogue_id"], id.as_str());
    let utts = report["utterances"].as_array().unwrap();
    assert_eq!(utts.len(), dialogues[0].utterances.len());
    for u in utts {
        let sum: f64 = u["tokens"]
            .as_array()
            .unwrap()
            .iter()
            .map(|t| t[1].as_f64().unwrap())
            .sum();
        assert!((sum - 1.0).abs() < 1e-9, "word weights sum to {sum}");
    }
    let dial_sum: f64 = utts.iter().map(|u| u["dialogue_weight"].as_f64().unwrap()).sum();
    assert!((dial_sum - 1.0).abs() < 1e-9);

    let code = exit_code(dicoh_bin().args([
        "inspect",
        "--checkpoint",
        p.train_dir.join("checkpoint.json").to_str().unwrap(),
        "--dialogues",
        p.corpus.join("test.jsonl").to_str().unwrap(),
        "--id",
        "no-such-id",
    ]));
    assert_eq!(code, 1);
}

#[test]
fn unknown_config_keys_are_rejected_with_exit_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.toml");
    std::fs::write(&config, "seed = 3\nnot_a_real_key = true\n").unwrap();
    let (text, acts) = raw_fixture(tmp.path(), 5, 1);
    let code = exit_code(dicoh_bin().args([
        "prepare",
        "--config",
        config.to_str().unwrap(),
        "--text",
        text.to_str().unwrap(),
        "--acts",
        acts.to_str().unwrap(),
    ]));
    assert_eq!(code, 2);
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let (text, acts) = raw_fixture(tmp.path(), 15, 5);
    let corpus = tmp.path().join("corpus");
    run_ok(dicoh_bin().args([
        "prepare",
        "--text",
        text.to_str().unwrap(),
        "--acts",
        acts.to_str().unwrap(),
        "--out",
        corpus.to_str().unwrap(),
    ]));
    let config = tmp.path().join("run.toml");
    std::fs::write(&config, "per_dialogue = 2\nseed = 7\n").unwrap();

    // Flag wins over the file: per-dialogue 3 applies.
    let pairs = tmp.path().join("pairs");
    run_ok(dicoh_bin().args([
        "perturb",
        "--config",
        config.to_str().unwrap(),
        "--corpus",
        corpus.to_str().unwrap(),
        "--domain",
        "uo",
        "--per-dialogue",
        "3",
        "--out",
        pairs.to_str().unwrap(),
    ]));
    let resolved = std::fs::read_to_string(pairs.join("resolved.toml")).unwrap();
    assert!(resolved.contains("per_dialogue = 3"), "{resolved}");
    assert!(resolved.contains("seed = 7"), "{resolved}");
}

#[test]
fn multi_seed_training_reports_mean_and_std() {
    let p = trained_pipeline();
    let out_dir = p.pairs.parent().unwrap().join("multi");
    let out = run_ok(dicoh_bin().args([
        "train",
        "--pairs",
        p.pairs.to_str().unwrap(),
        "--regime",
        "s-dicoh",
        "--epochs",
        "1",
        "--batch-size",
        "8",
        "--emb-dim",
        "8",
        "--utt-hidden",
        "4",
        "--dial-hidden",
        "4",
        "--n-max",
        "12",
        "--seed",
        "3",
        "--seeds",
        "2",
        "--out",
        out_dir.to_str().unwrap(),
    ]));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("±"), "{stdout}");
    assert!(out_dir.join("seed-3/checkpoint.json").exists());
    assert!(out_dir.join("seed-4/checkpoint.json").exists());
    assert!(out_dir.join("seeds-summary.txt").exists());
}
