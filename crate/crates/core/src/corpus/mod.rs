//! Labeled op-code corpora: objdump parsing, vocabulary, manifests and
//! synthetic generation.

pub mod disasm;
pub mod manifest;
pub mod synth;
pub mod vocab;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fsutil;

pub use disasm::{parse_disassembly, ParsedDisassembly};
pub use manifest::{load_manifest, save_manifest, CorpusManifest, ManifestRecord, Provenance};
pub use synth::{contains_motif, generate_synthetic_corpus, SynthParams, SyntheticCorpus};
pub use vocab::{Encoded, Vocabulary};

/// Vocabulary index of one op-code.
pub type Code = u32;

/// Padding index; never assigned to a mnemonic.
pub const PAD: Code = 0;

pub const MANIFEST_FILE: &str = "manifest.tsv";
pub const VOCAB_FILE: &str = "vocab.tsv";
pub const OPS_DIR: &str = "ops";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Benign = 0,
    Malicious = 1,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn as_f64(self) -> f64 {
        self as u8 as f64
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Benign => "benign",
            Label::Malicious => "malicious",
        }
    }
}

impl TryFrom<u8> for Label {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Label::Benign),
            1 => Ok(Label::Malicious),
            _ => Err(Error::invalid(format!("label must be 0 or 1, got {v}"))),
        }
    }
}

/// One file's label and integer-encoded op-code sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpcodeSequence {
    pub file_id: String,
    pub label: Label,
    pub codes: Vec<Code>,
}

/// A corpus directory read back into memory.
#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub manifest: CorpusManifest,
    pub vocab: Vocabulary,
    pub sequences: Vec<OpcodeSequence>,
    /// Mnemonics that were absent from the vocabulary and mapped to UNK.
    pub unknown: usize,
}

/// Writes `manifest.tsv`, `vocab.tsv` and one op-code file per record.
pub fn write_corpus<S: AsRef<str> + Sync>(
    dir: &Path,
    manifest: &CorpusManifest,
    vocab: &Vocabulary,
    mnemonics: &[Vec<S>],
) -> Result<()> {
    if manifest.records.len() != mnemonics.len() {
        return Err(Error::shape(
            "mnemonic lists",
            manifest.records.len(),
            mnemonics.len(),
        ));
    }
    fsutil::create_dir_all(&dir.join(OPS_DIR))?;
    manifest
        .records
        .par_iter()
        .zip(mnemonics.par_iter())
        .try_for_each(|(r, m)| manifest::write_opcode_file(&dir.join(&r.path), m))?;
    fsutil::write_atomic(&dir.join(VOCAB_FILE), vocab.to_text())?;
    save_manifest(manifest, &dir.join(MANIFEST_FILE))
}

pub fn write_synthetic_corpus(dir: &Path, corpus: &SyntheticCorpus) -> Result<()> {
    let size = corpus.vocab.size();
    let mnemonics: Vec<Vec<String>> = corpus
        .sequences
        .iter()
        .map(|s| {
            s.codes
                .iter()
                .map(|&c| synth::synthetic_mnemonic(c, size))
                .collect()
        })
        .collect();
    write_corpus(dir, &corpus.manifest, &corpus.vocab, &mnemonics)
}

pub fn load_corpus(dir: &Path) -> Result<LoadedCorpus> {
    let manifest = load_manifest(&dir.join(MANIFEST_FILE))?;
    let vocab = Vocabulary::parse(&fsutil::read_to_string(&dir.join(VOCAB_FILE))?)?;
    let encoded: Vec<(OpcodeSequence, usize)> = manifest
        .records
        .par_iter()
        .map(|r| {
            let mnemonics = manifest::read_opcode_file(&dir.join(&r.path))?;
            let e = vocab.encode(&mnemonics);
            Ok((
                OpcodeSequence {
                    file_id: r.file_id.clone(),
                    label: r.label,
                    codes: e.codes,
                },
                e.unknown,
            ))
        })
        .collect::<Result<_>>()?;
    let unknown = encoded.iter().map(|(_, u)| u).sum();
    Ok(LoadedCorpus {
        manifest,
        vocab,
        sequences: encoded.into_iter().map(|(s, _)| s).collect(),
        unknown,
    })
}

/// Per-file parse statistics from [`ingest_dir`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestFileReport {
    pub file_id: String,
    pub label: Label,
    pub mnemonics: usize,
    pub unparsed_lines: usize,
    pub bad_instructions: usize,
}

fn list_files(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Parses every objdump listing under `src/benign/` and `src/malicious/` and
/// writes a corpus directory to `out`.
pub fn ingest_dir(src: &Path, out: &Path) -> Result<Vec<IngestFileReport>> {
    let mut inputs = Vec::new();
    for label in [Label::Benign, Label::Malicious] {
        for path in list_files(&src.join(label.name()))? {
            inputs.push((label, path));
        }
    }
    if inputs.is_empty() {
        return Err(Error::invalid(format!(
            "no listings under {}/benign or {}/malicious",
            src.display(),
            src.display()
        )));
    }
    let parsed: Vec<ParsedDisassembly> = inputs
        .par_iter()
        .map(|(_, p)| {
            let bytes = fs::read(p).map_err(|e| Error::io(p, e))?;
            Ok(parse_disassembly(&String::from_utf8_lossy(&bytes)))
        })
        .collect::<Result<_>>()?;

    let mut records = Vec::with_capacity(inputs.len());
    let mut reports = Vec::with_capacity(inputs.len());
    for ((label, path), p) in inputs.iter().zip(&parsed) {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().replace(['\t', ' '], "_"))
            .unwrap_or_default();
        let file_id = format!("{}-{}", label.name(), stem);
        reports.push(IngestFileReport {
            file_id: file_id.clone(),
            label: *label,
            mnemonics: p.mnemonics.len(),
            unparsed_lines: p.unparsed_lines,
            bad_instructions: p.bad_instructions,
        });
        records.push(ManifestRecord {
            path: PathBuf::from(OPS_DIR).join(format!("{file_id}.ops")),
            file_id,
            label: *label,
        });
    }
    let lists: Vec<Vec<String>> = parsed.into_iter().map(|p| p.mnemonics).collect();
    let vocab = Vocabulary::build(&lists)?;
    let manifest = CorpusManifest {
        records,
        provenance: Provenance::Parsed,
    };
    write_corpus(out, &manifest, &vocab, &lists)?;
    Ok(reports)
}
