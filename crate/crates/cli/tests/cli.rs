//! Drives the compiled binary through the full workflow and checks the
//! documented exit codes land on real process boundaries.

use std::path::Path;
use std::process::{Command, Output};

fn cslm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cslm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = cslm(args);
    assert!(
        out.status.success(),
        "cslm {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn s(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

#[test]
fn full_workflow_synth_prep_train_eval_sample_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    let exp = dir.path().join("exp");

    ok(&[
        "synth",
        "--out",
        &s(&corpus),
        "--n",
        "120",
        "--vocab-size",
        "12",
        "--mean-len",
        "6.0",
        "--seed",
        "7",
    ]);
    assert_eq!(
        std::fs::read_to_string(&corpus).unwrap().lines().count(),
        120
    );

    ok(&["prep", "--corpus", &s(&corpus), "--exp", &s(&exp)]);
    assert!(exp.join("vocab.tsv").exists());
    assert!(exp.join("splits/train.txt").exists());
    assert!(exp.join("reports/corpus_stats.tsv").exists());

    ok(&[
        "train",
        "--exp",
        &s(&exp),
        "--set",
        "train.epochs=2",
        "--set",
        "train.decay_start=2",
        "--set",
        "train.batch=8",
        "--set",
        "model.embed=4",
        "--set",
        "model.hidden=4",
    ]);
    let ckpt = exp.join("checkpoints/best.ckpt");
    assert!(ckpt.exists());
    assert!(exp.join("logs/train.tsv").exists());
    assert!(exp.join("config.resolved").exists());

    let eval = ok(&[
        "eval",
        "--exp",
        &s(&exp),
        "--checkpoint",
        &s(&ckpt),
        "--split",
        "test",
        "--decompose",
    ]);
    let report = std::fs::read_to_string(exp.join("reports/eval_test.tsv")).unwrap();
    assert!(report.starts_with("class\tcount\tppl\n"));
    assert_eq!(report.lines().count(), 8);
    assert!(String::from_utf8_lossy(&eval.stderr).contains("perplexity"));

    ok(&[
        "sample",
        "--exp",
        &s(&exp),
        "--checkpoint",
        &s(&ckpt),
        "--n",
        "10",
        "--len",
        "5",
    ]);
    let samples = exp.join("reports/samples.txt");
    assert_eq!(
        std::fs::read_to_string(&samples).unwrap().lines().count(),
        10
    );
    assert!(exp.join("reports/samples.txt.meta").exists());
    assert!(exp.join("reports/novelty.tsv").exists());

    let analysis = ok(&[
        "analyze",
        "--corpus",
        &s(&corpus),
        "--against",
        &s(&exp.join("splits/train.txt")),
    ]);
    let text = String::from_utf8_lossy(&analysis.stdout).to_string();
    assert!(text.starts_with("metric\tvalue\n"));
    assert!(text.contains("switch_rate\t"));
    assert!(text.contains("novelty_2\t"));
}

#[test]
fn config_problems_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = cslm(&[
        "train",
        "--exp",
        &s(&dir.path().join("exp")),
        "--set",
        "no.such.key=1",
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("configuration error"));

    // A rejected flag value is also a configuration problem.
    let out = cslm(&[
        "synth",
        "--out",
        &s(&dir.path().join("x.txt")),
        "--switch-prob",
        "1.5",
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn broken_data_exits_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = cslm(&[
        "prep",
        "--corpus",
        &s(&dir.path().join("missing.txt")),
        "--exp",
        &s(&dir.path().join("exp")),
    ]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("data error"));
}

#[test]
fn checkpoint_from_another_vocabulary_exits_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let (ca, cb) = (dir.path().join("a.txt"), dir.path().join("b.txt"));
    let (ea, eb) = (dir.path().join("ea"), dir.path().join("eb"));
    ok(&["synth", "--out", &s(&ca), "--n", "60", "--vocab-size", "10"]);
    ok(&[
        "synth",
        "--out",
        &s(&cb),
        "--n",
        "60",
        "--vocab-size",
        "11",
        "--seed",
        "1",
    ]);
    ok(&["prep", "--corpus", &s(&ca), "--exp", &s(&ea)]);
    ok(&["prep", "--corpus", &s(&cb), "--exp", &s(&eb)]);
    ok(&[
        "train",
        "--exp",
        &s(&ea),
        "--set",
        "train.epochs=1",
        "--set",
        "train.decay_start=1",
        "--set",
        "model.embed=4",
        "--set",
        "model.hidden=4",
    ]);
    let out = cslm(&[
        "eval",
        "--exp",
        &s(&eb),
        "--checkpoint",
        &s(&ea.join("checkpoints/best.ckpt")),
    ]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("vocabulary"));
}

#[test]
fn usage_errors_from_the_parser_also_exit_2() {
    assert_eq!(code(&cslm(&["no-such-command"])), 2);
    assert_eq!(code(&cslm(&["eval", "--split", "weird"])), 2);
}
