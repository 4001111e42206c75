use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use opseqids::corpus::{
    self, generate_synthetic_corpus, write_synthetic_corpus, Code, SynthParams,
};
use opseqids::fsutil::write_atomic;
use opseqids::mlp::{self, frequency_vector, MlpConfig, MlpParams};
use opseqids::nn::AdamConfig;
use opseqids::prep::{self, CleaningPlan, LengthSpec, PrepPlan};
use opseqids::sweep::{
    self, emit_report, load_grid, load_report, run_grid, train_model, GridEntry, GridOptions,
    SweepConfig,
};
use opseqids::train::{train, Example, TrainConfig};

#[derive(Parser, Debug)]
#[command(
    name = "opseqids",
    version,
    about = "Op-code sequence malware classifier pipeline"
)]
struct Cli {
    /// Default seed for every randomized step.
    #[arg(long, global = true, env = "OPSEQIDS_SEED")]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse objdump listings under <dir>/benign and <dir>/malicious into a corpus.
    Ingest {
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-class length percentiles and log10 length histogram of a corpus.
    Stats {
        #[arg(long)]
        corpus: PathBuf,
        /// Also write stats.tsv and histogram.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0.1)]
        bin_width: f64,
    },
    /// Clean, balance and split a corpus into a dataset bundle.
    Prep {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Sequence length spec: Q(p) or MEAN.
        #[arg(long, default_value = "Q(0.75)")]
        seq_len: String,
        /// Per-class low-length floor quantile, or `none`.
        #[arg(long, default_value = "0.01")]
        floor_quantile: String,
        #[arg(long, default_value_t = 100)]
        min_keep_malicious: usize,
        /// Share of each class held out for validation.
        #[arg(long, default_value_t = 0.25)]
        split: f64,
        #[arg(long)]
        no_balance: bool,
    },
    /// Write a planted-motif synthetic corpus.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        n_benign: usize,
        #[arg(long, default_value_t = 200)]
        n_malicious: usize,
        #[arg(long, default_value_t = 50)]
        vocab_size: usize,
        #[arg(long, default_value_t = 50)]
        min_len: usize,
        #[arg(long, default_value_t = 200)]
        max_len: usize,
        /// Comma-separated motif indices.
        #[arg(long, default_value = "7,19,3,42")]
        motif: String,
        #[arg(long, default_value_t = 1.0)]
        motif_rate: f64,
    },
    /// Train one configuration on a bundle.
    Train {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Model::Lstm)]
        model: Model,
        /// Grid file holding the configuration (LSTM only).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Block to train when the file holds several.
        #[arg(long)]
        id: Option<String>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Train every grid row and write the reports.
    Sweep {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Grid file; the built-in nine-row grid when omitted.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Parallel jobs; 0 picks the core count.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Re-emit reports from a stored results directory.
    Report {
        #[arg(long)]
        results: PathBuf,
        /// Defaults to the results directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Model {
    Lstm,
    Mlp,
}

#[derive(clap::Args, Debug, Default)]
struct Overrides {
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    min_epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
}

impl Overrides {
    fn apply(&self, c: &mut SweepConfig, seed: Option<u64>) {
        if let Some(v) = self.max_epochs {
            c.max_epochs = v;
        }
        if let Some(v) = self.min_epochs {
            c.min_epochs = v;
        }
        if let Some(v) = self.lr {
            c.lr = v;
        }
        if let Some(v) = self.batch_size {
            c.batch_size = v;
        }
        if let Some(s) = seed {
            c.seed = s;
        }
    }
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<opseqids::Error> for Failure {
    fn from(e: opseqids::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn require_dir(flag: &str, path: &Path) -> Outcome {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Failure::Usage(format!(
            "{flag}: directory `{}` does not exist",
            path.display()
        )))
    }
}

fn require_file(flag: &str, path: &Path) -> Outcome {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Usage(format!(
            "{flag}: file `{}` does not exist",
            path.display()
        )))
    }
}

fn usage<T, E: std::fmt::Display>(flag: &str, r: Result<T, E>) -> Result<T, Failure> {
    r.map_err(|e| Failure::Usage(format!("{flag}: {e}")))
}

fn ingest(dir: &Path, out: &Path) -> Outcome {
    require_dir("<dir>", dir)?;
    let reports = corpus::ingest_dir(dir, out)?;
    let mnemonics: usize = reports.iter().map(|r| r.mnemonics).sum();
    let unparsed: usize = reports.iter().map(|r| r.unparsed_lines).sum();
    let bad: usize = reports.iter().map(|r| r.bad_instructions).sum();
    let empty = reports.iter().filter(|r| r.mnemonics == 0).count();
    println!(
        "ingested {} files ({empty} empty): {mnemonics} mnemonics, {unparsed} unparsed lines, {bad} (bad) instructions",
        reports.len()
    );
    Ok(())
}

fn stats(corpus_dir: &Path, out: Option<&Path>, bin_width: f64) -> Outcome {
    require_dir("--corpus", corpus_dir)?;
    let c = corpus::load_corpus(corpus_dir)?;
    let non_null: Vec<_> = c
        .sequences
        .into_iter()
        .filter(|s| !s.codes.is_empty())
        .collect();
    let by_class = prep::length_stats(&non_null)?;
    let report = prep::stats::stats_report(&by_class);
    print!("{report}");
    if let Some(dir) = out {
        let hist = prep::log10_length_histogram(&by_class, bin_width)?;
        write_atomic(&dir.join("stats.tsv"), &report)?;
        write_atomic(
            &dir.join("histogram.csv"),
            prep::stats::histogram_csv(&hist),
        )?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn prep_cmd(
    corpus_dir: &Path,
    out: &Path,
    seq_len: &str,
    floor: &str,
    min_keep_malicious: usize,
    split: f64,
    no_balance: bool,
    seed: Option<u64>,
) -> Outcome {
    let length_spec: LengthSpec = usage("--seq-len", seq_len.parse())?;
    let floor_quantile = match floor {
        "none" => None,
        q => Some(usage("--floor-quantile", q.parse::<f64>())?),
    };
    require_dir("--corpus", corpus_dir)?;
    let plan = PrepPlan {
        length_spec,
        cleaning: CleaningPlan {
            floor_quantile,
            min_keep_malicious,
        },
        seed: seed.unwrap_or(PrepPlan::default().seed),
        balance: !no_balance,
        split_fraction: split,
    };
    let c = corpus::load_corpus(corpus_dir)?;
    let prepared = prep::prepare(c.sequences, &plan)?;
    prep::write_bundle(out, &c.vocab, &prepared, &plan, c.unknown)?;
    println!(
        "L_sequence {}: {} train, {} test, {} removed",
        prepared.sequence_length,
        prepared.train.len(),
        prepared.test.len(),
        prepared.removal.removed.len()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn synth(
    out: &Path,
    n_benign: usize,
    n_malicious: usize,
    vocab_size: usize,
    min_len: usize,
    max_len: usize,
    motif: &str,
    motif_rate: f64,
    seed: Option<u64>,
) -> Outcome {
    let motif: Vec<Code> = usage(
        "--motif",
        motif
            .split(',')
            .map(|t| t.trim().parse::<Code>())
            .collect::<Result<_, _>>(),
    )?;
    let params = SynthParams {
        n_benign,
        n_malicious,
        vocab_size,
        length_range: (min_len, max_len),
        motif,
        motif_rate,
        seed: seed.unwrap_or(SynthParams::default().seed),
    };
    let c = generate_synthetic_corpus(&params)?;
    write_synthetic_corpus(out, &c)?;
    println!("wrote {} sequences to {}", c.sequences.len(), out.display());
    Ok(())
}

fn pick_config(path: &Path, id: Option<&str>) -> Result<SweepConfig, Failure> {
    let mut grid = load_grid(path)?;
    match id {
        Some(id) => grid
            .into_iter()
            .find(|c| c.id == id)
            .ok_or_else(|| Failure::Usage(format!("--id: no block [{id}] in {}", path.display()))),
        None if grid.len() == 1 => Ok(grid.remove(0)),
        None => Err(Failure::Usage(format!(
            "--id: {} holds {} configurations; choose one",
            path.display(),
            grid.len()
        ))),
    }
}

fn print_entries(entries: &[GridEntry]) {
    for e in entries {
        match &e.outcome {
            Ok(r) => println!(
                "{}: val_loss {:.6} acc {:.2}% (best epoch {} of {})",
                e.config.id,
                r.val_loss,
                r.val_accuracy,
                r.best_epoch,
                r.epochs_run()
            ),
            Err(msg) => println!("{}: failed: {msg}", e.config.id),
        }
    }
}

fn train_lstm(
    bundle: &Path,
    out: &Path,
    config: Option<&Path>,
    id: Option<&str>,
    o: &Overrides,
    seed: Option<u64>,
) -> Outcome {
    let config =
        config.ok_or_else(|| Failure::Usage("--config is required for --model lstm".into()))?;
    require_file("--config", config)?;
    require_dir("--bundle", bundle)?;
    let mut cfg = pick_config(config, id)?;
    o.apply(&mut cfg, seed);
    let data = prep::load_bundle(bundle)?;
    let (result, model) = train_model(&cfg, &data)?;
    opseqids::lstm::save_checkpoint(&model, &out.join(format!("{}.ckpt", cfg.id)))?;
    let entries = vec![GridEntry {
        config: cfg,
        outcome: Ok(result),
    }];
    emit_report(&entries, out)?;
    print_entries(&entries);
    Ok(())
}

fn train_mlp(bundle: &Path, out: &Path, o: &Overrides, seed: Option<u64>) -> Outcome {
    require_dir("--bundle", bundle)?;
    let data = prep::load_bundle(bundle)?;
    let v = data.vocab_size();
    let to_examples =
        |seqs: &[corpus::OpcodeSequence]| -> opseqids::Result<Vec<Example<Vec<f64>>>> {
            seqs.iter()
                .map(|s| {
                    Ok(Example {
                        x: frequency_vector(&s.codes, v)?,
                        y: s.label,
                    })
                })
                .collect()
        };
    let (train_set, val_set) = (to_examples(&data.train)?, to_examples(&data.test)?);
    let defaults = TrainConfig::default();
    let seed = seed.unwrap_or(defaults.seed);
    let cfg = TrainConfig {
        batch_size: o.batch_size.unwrap_or(defaults.batch_size),
        min_epochs: o.min_epochs.unwrap_or(defaults.min_epochs),
        max_epochs: o.max_epochs.unwrap_or(defaults.max_epochs),
        seed: opseqids::nn::derive_seed(seed, &[1]),
        adam: AdamConfig {
            lr: o.lr.unwrap_or(defaults.adam.lr),
            ..AdamConfig::default()
        },
        ..defaults
    };
    let params = MlpParams::init(
        MlpConfig::for_vocab(v),
        opseqids::nn::derive_seed(seed, &[0]),
    )?;
    let outcome = train(params, &train_set, &val_set, &cfg)?;
    mlp::save_checkpoint(&outcome.model, &out.join("mlp.ckpt"))?;
    let mut hist = String::from("epoch,train_loss,val_loss,val_acc\n");
    for h in &outcome.history {
        let _ = writeln!(
            hist,
            "{},{},{},{}",
            h.epoch, h.train_loss, h.val_loss, h.val_accuracy
        );
    }
    write_atomic(&out.join("mlp_history.csv"), hist)?;
    println!(
        "mlp: val_loss {:.6} acc {:.2}% (best epoch {} of {})",
        outcome.val_loss,
        outcome.val_accuracy,
        outcome.best_epoch,
        outcome.history.len()
    );
    Ok(())
}

fn sweep_cmd(
    bundle: &Path,
    out: &Path,
    grid: Option<&Path>,
    workers: usize,
    o: &Overrides,
    seed: Option<u64>,
) -> Outcome {
    if let Some(g) = grid {
        require_file("--grid", g)?;
    }
    require_dir("--bundle", bundle)?;
    let mut configs = match grid {
        Some(g) => load_grid(g)?,
        None => sweep::default_grid(),
    };
    for c in &mut configs {
        o.apply(c, seed);
    }
    let data = prep::load_bundle(bundle)?;
    let opts = GridOptions {
        workers,
        checkpoint_dir: Some(out.join("checkpoints")),
    };
    let entries = run_grid(&configs, &data, &opts)?;
    let files = emit_report(&entries, out)?;
    print_entries(&entries);
    println!("results in {}", files.results.display());
    Ok(())
}

fn report(results: &Path, out: Option<&Path>) -> Outcome {
    require_dir("--results", results)?;
    let entries = load_report(results)?;
    emit_report(&entries, out.unwrap_or(results))?;
    print_entries(&entries);
    Ok(())
}

fn dispatch(cli: Cli) -> Outcome {
    let seed = cli.seed;
    match cli.command {
        Command::Ingest { dir, out } => ingest(&dir, &out),
        Command::Stats {
            corpus,
            out,
            bin_width,
        } => stats(&corpus, out.as_deref(), bin_width),
        Command::Prep {
            corpus,
            out,
            seq_len,
            floor_quantile,
            min_keep_malicious,
            split,
            no_balance,
        } => prep_cmd(
            &corpus,
            &out,
            &seq_len,
            &floor_quantile,
            min_keep_malicious,
            split,
            no_balance,
            seed,
        ),
        Command::Synth {
            out,
            n_benign,
            n_malicious,
            vocab_size,
            min_len,
            max_len,
            motif,
            motif_rate,
        } => synth(
            &out,
            n_benign,
            n_malicious,
            vocab_size,
            min_len,
            max_len,
            &motif,
            motif_rate,
            seed,
        ),
        Command::Train {
            bundle,
            out,
            model: Model::Lstm,
            config,
            id,
            overrides,
        } => train_lstm(
            &bundle,
            &out,
            config.as_deref(),
            id.as_deref(),
            &overrides,
            seed,
        ),
        Command::Train {
            bundle,
            out,
            model: Model::Mlp,
            overrides,
            ..
        } => train_mlp(&bundle, &out, &overrides, seed),
        Command::Sweep {
            bundle,
            out,
            grid,
            workers,
            overrides,
        } => sweep_cmd(&bundle, &out, grid.as_deref(), workers, &overrides, seed),
        Command::Report { results, out } => report(&results, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("run `opseqids --help` for usage");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
