use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_opseqids"));
    c.env_remove("OPSEQIDS_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(root).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: [&str; 10] = [
    "--n-benign",
    "24",
    "--n-malicious",
    "24",
    "--vocab-size",
    "12",
    "--min-len",
    "8",
    "--max-len",
    "16",
];

fn small_corpus(dir: &Path, seed: &str) {
    let mut args = vec!["synth", "--out", s(dir), "--seed", seed, "--motif", "3,5,7"];
    args.extend(SMALL);
    ok(&args);
}

fn small_bundle(root: &Path) -> PathBuf {
    let corpus = root.join("corpus");
    let bundle = root.join("bundle");
    small_corpus(&corpus, "7");
    ok(&[
        "prep",
        "--corpus",
        s(&corpus),
        "--out",
        s(&bundle),
        "--min-keep-malicious",
        "0",
    ]);
    bundle
}

#[test]
fn synth_is_deterministic() {
    let t = tempfile::tempdir().unwrap();
    let (a, b, c) = (t.path().join("a"), t.path().join("b"), t.path().join("c"));
    small_corpus(&a, "7");
    small_corpus(&b, "7");
    small_corpus(&c, "8");
    assert_eq!(tree(&a), tree(&b));
    assert_ne!(tree(&a), tree(&c));
}

#[test]
fn seed_comes_from_environment() {
    let t = tempfile::tempdir().unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    small_corpus(&a, "11");
    let mut args = vec!["synth", "--out", s(&b), "--motif", "3,5,7"];
    args.extend(SMALL);
    let out = bin()
        .args(&args)
        .env("OPSEQIDS_SEED", "11")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(tree(&a), tree(&b));
}

#[test]
fn missing_corpus_names_the_flag() {
    let t = tempfile::tempdir().unwrap();
    let out = run(&[
        "prep",
        "--corpus",
        s(&t.path().join("nope")),
        "--out",
        s(&t.path().join("b")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--corpus"), "{err}");
    assert!(!t.path().join("b").exists());
}

#[test]
fn usage_errors_exit_one() {
    let out = run(&["stats", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(
        run(&["prep", "--corpus", "x", "--out", "y", "--seq-len", "Q(2)"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_two() {
    let t = tempfile::tempdir().unwrap();
    let out = run(&["stats", "--corpus", s(t.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("manifest"));
}

#[test]
fn ingest_then_stats() {
    let t = tempfile::tempdir().unwrap();
    let src = t.path().join("src");
    for (label, body) in [
        ("benign", "  401000:\t55 \tpush   %ebp\n  401001:\t89 e5\tmov    %esp,%ebp\n"),
        ("malicious", "Disassembly of section .text:\n  401000:\t90\tnop\n  401001:\tc3\tret\n  401002:\tc3\tret\n"),
    ] {
        fs::create_dir_all(src.join(label)).unwrap();
        fs::write(src.join(label).join("a.txt"), body).unwrap();
    }
    let corpus = t.path().join("corpus");
    let msg = ok(&["ingest", s(&src), "--out", s(&corpus)]);
    assert!(msg.contains("ingested 2 files"), "{msg}");
    let vocab = fs::read_to_string(corpus.join("vocab.tsv")).unwrap();
    for m in ["mov", "nop", "push", "ret"] {
        assert!(vocab.contains(m));
    }
    let stats_dir = t.path().join("stats");
    ok(&["stats", "--corpus", s(&corpus), "--out", s(&stats_dir)]);
    assert!(stats_dir.join("stats.tsv").exists());
    assert!(
        fs::read_to_string(stats_dir.join("histogram.csv"))
            .unwrap()
            .lines()
            .count()
            > 1
    );
}

#[test]
fn sweep_writes_nine_rows_and_report_reproduces_them() {
    let t = tempfile::tempdir().unwrap();
    let bundle = small_bundle(t.path());
    let out = t.path().join("sweep");
    ok(&[
        "sweep",
        "--bundle",
        s(&bundle),
        "--out",
        s(&out),
        "--max-epochs",
        "1",
        "--min-epochs",
        "1",
    ]);
    let results = fs::read_to_string(out.join("results.csv")).unwrap();
    let lines: Vec<&str> = results.lines().collect();
    assert!(lines[0].starts_with("SN,SqLn,EmSz,Lyrs,OutDim,ActFun,DropOut,BchSz,Loss,Acc%"));
    assert_eq!(lines.len(), 10);
    assert!(lines[9].starts_with("C-9,"));
    assert_eq!(fs::read_dir(out.join("checkpoints")).unwrap().count(), 9);

    let again = t.path().join("again");
    ok(&["report", "--results", s(&out), "--out", s(&again)]);
    for f in [
        "results.csv",
        "history.csv",
        "ranking.csv",
        "levels.csv",
        "aliases.csv",
    ] {
        assert_eq!(
            fs::read(out.join(f)).unwrap(),
            fs::read(again.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn train_single_config_and_baseline() {
    let t = tempfile::tempdir().unwrap();
    let bundle = small_bundle(t.path());
    let grid = t.path().join("one.grid");
    fs::write(
        &grid,
        "[tiny]\nSqLn = Q(1.0)\nEmSz = 4\nLyrs = 1\nOutDim = 4\nActFun = tanh\nDropOut = 0.0\nBchSz = 8\nmax_epochs = 2\nmin_epochs = 1\n",
    )
    .unwrap();
    let out = t.path().join("train");
    let msg = ok(&[
        "train",
        "--bundle",
        s(&bundle),
        "--out",
        s(&out),
        "--config",
        s(&grid),
    ]);
    assert!(msg.starts_with("tiny:"), "{msg}");
    assert!(out.join("tiny.ckpt").exists());
    assert!(out.join("results.csv").exists());

    let missing = run(&["train", "--bundle", s(&bundle), "--out", s(&out)]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("--config"));

    let msg = ok(&[
        "train",
        "--model",
        "mlp",
        "--bundle",
        s(&bundle),
        "--out",
        s(&out),
        "--max-epochs",
        "2",
        "--min-epochs",
        "1",
    ]);
    assert!(msg.starts_with("mlp:"), "{msg}");
    assert!(fs::read_to_string(out.join("mlp.ckpt"))
        .unwrap()
        .starts_with("OPSEQIDS-MLP v1"));
}
