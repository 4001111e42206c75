use opseqids::corpus::{generate_synthetic_corpus, SynthParams};
use opseqids::lstm::{load_checkpoint, save_checkpoint};
use opseqids::prep::{prepare, Bundle, CleaningPlan, PrepPlan};
use opseqids::sweep::{
    default_grid, emit_report, load_report, run_grid, to_examples, train_model, DimSpec,
    GridOptions, SweepConfig,
};
use opseqids::train::evaluate;

fn bundle() -> Bundle {
    let c = generate_synthetic_corpus(&SynthParams {
        n_benign: 30,
        n_malicious: 30,
        vocab_size: 12,
        length_range: (8, 20),
        motif: vec![2, 9, 4],
        ..SynthParams::default()
    })
    .unwrap();
    let plan = PrepPlan {
        cleaning: CleaningPlan {
            min_keep_malicious: 0,
            ..CleaningPlan::default()
        },
        ..PrepPlan::default()
    };
    let p = prepare(c.sequences, &plan).unwrap();
    Bundle::from_prepared(c.vocab, &p, &plan)
}

fn quick(mut c: SweepConfig) -> SweepConfig {
    c.min_epochs = 1;
    c.max_epochs = 2;
    c
}

fn small_grid() -> Vec<SweepConfig> {
    default_grid()
        .into_iter()
        .map(|mut c| {
            c.embedding_size = c.embedding_size.min(8);
            c.num_layers = c.num_layers.min(2);
            quick(c)
        })
        .collect()
}

#[test]
fn failing_row_is_isolated() {
    let data = bundle();
    let mut grid = small_grid();
    grid[4].seq_len = DimSpec::Fixed(0);
    let entries = run_grid(&grid, &data, &GridOptions::default()).unwrap();
    assert_eq!(entries.len(), 9);
    let failed: Vec<&str> = entries
        .iter()
        .filter(|e| e.outcome.is_err())
        .map(|e| e.config.id.as_str())
        .collect();
    assert_eq!(failed, vec!["C-5"]);
    for e in &entries {
        if let Ok(r) = &e.outcome {
            assert!((0.0..=100.0).contains(&r.val_accuracy));
            assert!(r.best_epoch >= 1 && r.best_epoch <= r.epochs_run());
            assert_eq!(r.val_loss, r.history[r.best_epoch - 1].val_loss);
        }
    }
}

#[test]
fn same_seed_same_bytes() {
    let data = bundle();
    let grid = small_grid();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for (d, workers) in dirs.iter().zip([1, 3]) {
        let entries = run_grid(
            &grid,
            &data,
            &GridOptions {
                workers,
                checkpoint_dir: None,
            },
        )
        .unwrap();
        emit_report(&entries, d.path()).unwrap();
    }
    for f in [
        "results.csv",
        "history.csv",
        "ranking.csv",
        "levels.csv",
        "aliases.csv",
    ] {
        let a = std::fs::read(dirs[0].path().join(f)).unwrap();
        let b = std::fs::read(dirs[1].path().join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    let back = load_report(dirs[0].path()).unwrap();
    assert_eq!(back.len(), 9);
}

#[test]
fn checkpoint_reproduces_best_loss() {
    let data = bundle();
    let cfg = quick(small_grid().remove(2));
    let (r, model) = train_model(&cfg, &data).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("best.ckpt");
    save_checkpoint(&model, &path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    let (loss, acc) = evaluate(&back, &to_examples(&data.test, r.seq_len)).unwrap();
    assert!(
        (loss - r.val_loss).abs() <= 1e-12,
        "{loss} vs {}",
        r.val_loss
    );
    assert_eq!(acc, r.val_accuracy);
}
