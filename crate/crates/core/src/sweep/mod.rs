//! Single-configuration training, grid runs, importance ranking and reports.

pub mod config;
pub mod grid;
pub mod importance;
pub mod report;

use std::cmp::Ordering;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

pub use config::{DimSpec, SweepConfig, ALLOWED_DROPOUT};
pub use grid::{default_grid, format_grid, load_grid, parse_grid, DEFAULT_GRID};
pub use importance::{aliased_pairs, rank_importance, Importance, LevelMean};
pub use report::{emit_report, load_report, ReportFiles, RESULTS_HEADER};

use crate::corpus::{Code, OpcodeSequence};
use crate::error::{Error, Result};
use crate::lstm::{save_checkpoint, NetworkConfig, NetworkParams};
use crate::nn::{derive_seed, AdamConfig};
use crate::prep::{trim_pad, Bundle};
use crate::train::{train, EpochRecord, Example, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub config_id: String,
    /// Resolved sequence length and dense width.
    pub seq_len: usize,
    pub out_dim: usize,
    pub best_epoch: usize,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub history: Vec<EpochRecord>,
    /// Seconds; excluded from equality-sensitive outputs.
    pub wall_time: f64,
}

impl SweepResult {
    pub fn epochs_run(&self) -> usize {
        self.history.len()
    }
}

/// Trim-pads every sequence to `len` and pairs it with its label.
pub fn to_examples(data: &[OpcodeSequence], len: usize) -> Vec<Example<Vec<Code>>> {
    data.iter()
        .map(|s| Example {
            x: trim_pad(&s.codes, len),
            y: s.label,
        })
        .collect()
}

/// Network shape for `cfg` once its length specs are resolved.
pub fn network_config(cfg: &SweepConfig, vocab_size: usize, out_dim: usize) -> NetworkConfig {
    NetworkConfig {
        vocab_size,
        embedding_size: cfg.embedding_size,
        hidden_size: cfg.embedding_size,
        num_layers: cfg.num_layers,
        out_dim,
        act_fn: cfg.act_fn,
        dropout: cfg.dropout,
    }
}

/// Trains one configuration on the bundle's split and returns the result
/// together with the restored best-epoch parameters.
pub fn train_model(cfg: &SweepConfig, data: &Bundle) -> Result<(SweepResult, NetworkParams)> {
    cfg.validate()?;
    let start = Instant::now();
    let seq_len = cfg.seq_len.resolve(&data.combined);
    let out_dim = cfg.out_dim.resolve(&data.combined);
    let train_set = to_examples(&data.train, seq_len);
    let val_set = to_examples(&data.test, seq_len);
    let net = NetworkParams::init(
        network_config(cfg, data.vocab_size(), out_dim),
        derive_seed(cfg.seed, &[0]),
    )?;
    let tc = TrainConfig {
        batch_size: cfg.batch_size,
        min_epochs: cfg.min_epochs,
        max_epochs: cfg.max_epochs,
        seed: derive_seed(cfg.seed, &[1]),
        adam: AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
        ..TrainConfig::default()
    };
    let out = train(net, &train_set, &val_set, &tc)?;
    let result = SweepResult {
        config_id: cfg.id.clone(),
        seq_len,
        out_dim,
        best_epoch: out.best_epoch,
        val_loss: out.val_loss,
        val_accuracy: out.val_accuracy,
        history: out.history,
        wall_time: start.elapsed().as_secs_f64(),
    };
    Ok((result, out.model))
}

/// Outcome of one grid row. Failures are kept as messages so the remaining
/// rows still run.
#[derive(Debug, Clone, PartialEq)]
pub struct GridEntry {
    pub config: SweepConfig,
    pub outcome: std::result::Result<SweepResult, String>,
}

#[derive(Debug, Clone, Default)]
pub struct GridOptions {
    /// Parallel jobs; 0 uses rayon's default.
    pub workers: usize,
    /// Where to save `<id>.ckpt` for every successful row.
    pub checkpoint_dir: Option<PathBuf>,
}

/// Orders ids like `C-2` before `C-10`.
pub fn compare_ids(a: &str, b: &str) -> Ordering {
    let split = |s: &str| {
        let digits = s.len() - s.trim_end_matches(|c: char| c.is_ascii_digit()).len();
        let (head, tail) = s.split_at(s.len() - digits);
        (head.to_string(), tail.parse::<u128>().ok())
    };
    let (ha, na) = split(a);
    let (hb, nb) = split(b);
    ha.cmp(&hb).then(na.cmp(&nb)).then(a.cmp(b))
}

fn run_one(
    cfg: &SweepConfig,
    data: &Bundle,
    dir: Option<&Path>,
) -> std::result::Result<SweepResult, String> {
    let (result, model) = train_model(cfg, data).map_err(|e| e.to_string())?;
    if let Some(d) = dir {
        save_checkpoint(&model, &d.join(format!("{}.ckpt", cfg.id))).map_err(|e| e.to_string())?;
    }
    Ok(result)
}

/// Trains every configuration on the same split and returns one entry per
/// row, sorted by config id.
pub fn run_grid(
    configs: &[SweepConfig],
    data: &Bundle,
    opts: &GridOptions,
) -> Result<Vec<GridEntry>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::invalid(format!("worker pool: {e}")))?;
    let dir = opts.checkpoint_dir.as_deref();
    let mut entries: Vec<GridEntry> = pool.install(|| {
        configs
            .par_iter()
            .map(|c| GridEntry {
                config: c.clone(),
                outcome: run_one(c, data, dir),
            })
            .collect()
    });
    entries.sort_by(|a, b| compare_ids(&a.config.id, &b.config.id));
    Ok(entries)
}
