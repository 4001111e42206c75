//! On-disk dataset bundle written by `prep` and consumed by training.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::corpus::{
    manifest::{CorpusManifest, ManifestRecord, Provenance},
    Code, OpcodeSequence, Vocabulary, MANIFEST_FILE, VOCAB_FILE,
};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::prep::stats::{histogram_csv, log10_length_histogram, stats_report, LengthStats};
use crate::prep::{PrepPlan, Prepared};

pub const SPLIT_FILE: &str = "split.tsv";
pub const LENGTHS_FILE: &str = "lengths.tsv";
pub const META_FILE: &str = "prep.meta";
pub const REMOVAL_FILE: &str = "removal.tsv";
pub const STATS_FILE: &str = "stats.tsv";
pub const HISTOGRAM_FILE: &str = "histogram.csv";
pub const SEQ_DIR: &str = "seq";

/// Provenance of a prepared bundle: `key=value` lines.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrepMeta {
    pub entries: Vec<(String, String)>,
}

impl PrepMeta {
    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut meta = PrepMeta::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse("prep metadata", i + 1, "expected key=value"))?;
            if k.trim().is_empty() {
                return Err(Error::parse("prep metadata", i + 1, "empty key"));
            }
            meta.set(k.trim(), v.trim());
        }
        Ok(meta)
    }
}

/// A prepared dataset: un-padded train/test sequences plus the statistics
/// needed to resolve per-configuration sequence lengths.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub vocab: Vocabulary,
    pub train: Vec<OpcodeSequence>,
    pub test: Vec<OpcodeSequence>,
    pub combined: LengthStats,
    pub meta: PrepMeta,
}

impl Bundle {
    pub fn vocab_size(&self) -> usize {
        self.vocab.size()
    }

    /// Builds an in-memory bundle straight from [`Prepared`] output.
    pub fn from_prepared(vocab: Vocabulary, prepared: &Prepared, plan: &PrepPlan) -> Self {
        Bundle {
            vocab,
            train: prepared.train.clone(),
            test: prepared.test.clone(),
            combined: prepared.combined.clone(),
            meta: build_meta(prepared, plan),
        }
    }
}

fn build_meta(p: &Prepared, plan: &PrepPlan) -> PrepMeta {
    let mut m = PrepMeta::default();
    m.set("format", "opseqids-bundle v1");
    m.set("sequence_length", p.sequence_length);
    m.set("length_spec", plan.length_spec);
    m.set("seed", plan.seed);
    m.set("balance", plan.balance);
    m.set("split_fraction", plan.split_fraction);
    m.set(
        "floor_quantile",
        plan.cleaning
            .floor_quantile
            .map_or("none".to_string(), |q| q.to_string()),
    );
    m.set("min_keep_malicious", plan.cleaning.min_keep_malicious);
    for (label, t) in &p.removal.final_thresholds {
        m.set(&format!("threshold_{}", label.name()), t);
    }
    for (label, n) in &p.removal.iterations {
        m.set(&format!("threshold_iterations_{}", label.name()), n);
    }
    m.set("removed", p.removal.removed.len());
    m.set("n_train", p.train.len());
    m.set("n_test", p.test.len());
    m
}

fn seq_path(file_id: &str) -> PathBuf {
    PathBuf::from(SEQ_DIR).join(format!("{file_id}.idx"))
}

fn codes_text(codes: &[Code]) -> String {
    let mut out = String::with_capacity(codes.len() * 3);
    for c in codes {
        let _ = writeln!(out, "{c}");
    }
    out
}

pub fn parse_codes(text: &str, max_code: Code) -> Result<Vec<Code>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let c: Code = l
                .trim()
                .parse()
                .map_err(|_| Error::parse("sequence file", i + 1, format!("bad index `{l}`")))?;
            if c == 0 || c > max_code {
                return Err(Error::parse(
                    "sequence file",
                    i + 1,
                    format!("index {c} outside 1..={max_code}"),
                ));
            }
            Ok(c)
        })
        .collect()
}

/// Writes the bundle directory.
pub fn write_bundle(
    dir: &Path,
    vocab: &Vocabulary,
    prepared: &Prepared,
    plan: &PrepPlan,
    unknown: usize,
) -> Result<()> {
    fsutil::create_dir_all(&dir.join(SEQ_DIR))?;
    let all: Vec<(&OpcodeSequence, &str)> = prepared
        .train
        .iter()
        .map(|s| (s, "train"))
        .chain(prepared.test.iter().map(|s| (s, "test")))
        .collect();
    all.par_iter().try_for_each(|(s, _)| {
        fsutil::write_atomic(&dir.join(seq_path(&s.file_id)), codes_text(&s.codes))
    })?;

    let manifest = CorpusManifest {
        records: all
            .iter()
            .map(|(s, _)| ManifestRecord {
                file_id: s.file_id.clone(),
                path: seq_path(&s.file_id),
                label: s.label,
            })
            .collect(),
        provenance: Provenance::Parsed,
    };
    let mut split = String::new();
    for (s, part) in &all {
        let _ = writeln!(split, "{}\t{part}", s.file_id);
    }
    let mut lengths = String::new();
    for (id, label, n) in &prepared.cleaned_lengths {
        let _ = writeln!(lengths, "{id}\t{}\t{n}", label.as_u8());
    }
    let mut meta = build_meta(prepared, plan);
    meta.set("vocab_size", vocab.size());
    meta.set("unknown_mnemonics", unknown);

    fsutil::write_atomic(&dir.join(VOCAB_FILE), vocab.to_text())?;
    fsutil::write_atomic(&dir.join(SPLIT_FILE), split)?;
    fsutil::write_atomic(&dir.join(LENGTHS_FILE), lengths)?;
    fsutil::write_atomic(&dir.join(REMOVAL_FILE), prepared.removal.to_text())?;
    fsutil::write_atomic(&dir.join(STATS_FILE), stats_report(&prepared.input_stats))?;
    fsutil::write_atomic(
        &dir.join(HISTOGRAM_FILE),
        histogram_csv(&log10_length_histogram(&prepared.input_stats, 0.1)?),
    )?;
    fsutil::write_atomic(&dir.join(META_FILE), meta.to_text())?;
    // manifest last: its presence marks a complete bundle
    crate::corpus::save_manifest(&manifest, &dir.join(MANIFEST_FILE))
}

fn parse_lengths(text: &str) -> Result<Vec<usize>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.rsplit('\t')
                .next()
                .and_then(|n| n.trim().parse().ok())
                .ok_or_else(|| Error::parse("lengths", i + 1, "expected `id<TAB>label<TAB>length`"))
        })
        .collect()
}

pub fn load_bundle(dir: &Path) -> Result<Bundle> {
    let manifest = crate::corpus::load_manifest(&dir.join(MANIFEST_FILE))?;
    let vocab = Vocabulary::parse(&fsutil::read_to_string(&dir.join(VOCAB_FILE))?)?;
    let meta = PrepMeta::parse(&fsutil::read_to_string(&dir.join(META_FILE))?)?;

    let mut part: HashMap<String, bool> = HashMap::new();
    for (i, line) in fsutil::read_to_string(&dir.join(SPLIT_FILE))?
        .lines()
        .enumerate()
    {
        if line.trim().is_empty() {
            continue;
        }
        let (id, p) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse("split", i + 1, "expected `file_id<TAB>train|test`"))?;
        let is_test = match p.trim() {
            "train" => false,
            "test" => true,
            other => {
                return Err(Error::parse(
                    "split",
                    i + 1,
                    format!("unknown partition `{other}`"),
                ))
            }
        };
        part.insert(id.to_string(), is_test);
    }

    let max_code = vocab.unk();
    let seqs: Vec<(OpcodeSequence, bool)> = manifest
        .records
        .par_iter()
        .map(|r| {
            let codes = parse_codes(&fsutil::read_to_string(&dir.join(&r.path))?, max_code)?;
            let is_test = *part
                .get(&r.file_id)
                .ok_or_else(|| Error::invalid(format!("{} missing from split.tsv", r.file_id)))?;
            Ok((
                OpcodeSequence {
                    file_id: r.file_id.clone(),
                    label: r.label,
                    codes,
                },
                is_test,
            ))
        })
        .collect::<Result<_>>()?;
    let (test, train): (Vec<_>, Vec<_>) = seqs.into_iter().partition(|(_, t)| *t);

    let lengths = parse_lengths(&fsutil::read_to_string(&dir.join(LENGTHS_FILE))?)?;
    Ok(Bundle {
        vocab,
        train: train.into_iter().map(|(s, _)| s).collect(),
        test: test.into_iter().map(|(s, _)| s).collect(),
        combined: LengthStats::from_counts(&lengths)?,
        meta,
    })
}
