//! Planted-motif synthetic corpora for desk-scale verification.

use rand::Rng as _;

use crate::corpus::manifest::{CorpusManifest, ManifestRecord, Provenance};
use crate::corpus::{Code, Label, OpcodeSequence, Vocabulary};
use crate::error::{Error, Result};
use crate::nn::rng::{seeded, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub n_benign: usize,
    pub n_malicious: usize,
    pub vocab_size: usize,
    /// Inclusive length bounds.
    pub length_range: (usize, usize),
    pub motif: Vec<Code>,
    /// Share of malicious sequences that carry the motif; the rest are
    /// motif-free "hard" positives.
    pub motif_rate: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            n_benign: 200,
            n_malicious: 200,
            vocab_size: 50,
            length_range: (50, 200),
            motif: vec![7, 19, 3, 42],
            motif_rate: 1.0,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub manifest: CorpusManifest,
    pub sequences: Vec<OpcodeSequence>,
    pub vocab: Vocabulary,
}

impl SynthParams {
    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.length_range;
        if self.motif.is_empty() {
            return Err(Error::invalid("motif must not be empty"));
        }
        if self.vocab_size < 2 {
            return Err(Error::invalid("vocab_size must be at least 2"));
        }
        if let Some(&bad) = self
            .motif
            .iter()
            .find(|&&c| c == 0 || c as usize > self.vocab_size)
        {
            return Err(Error::invalid(format!(
                "motif index {bad} outside 1..={}",
                self.vocab_size
            )));
        }
        if !(self.motif_rate > 0.0 && self.motif_rate <= 1.0) {
            return Err(Error::invalid(format!(
                "motif_rate {} outside (0, 1]",
                self.motif_rate
            )));
        }
        if lo < self.motif.len() || lo > hi {
            return Err(Error::invalid(format!(
                "length range ({lo}, {hi}) must satisfy motif length <= min <= max"
            )));
        }
        Ok(())
    }
}

/// Mnemonic used for synthetic index `i`; zero-padded so lexicographic order
/// equals index order and a rebuilt vocabulary reproduces the indices.
pub fn synthetic_mnemonic(i: Code, vocab_size: usize) -> String {
    let width = vocab_size.to_string().len().max(4);
    format!("op{i:0width$}")
}

pub fn synthetic_vocabulary(vocab_size: usize) -> Vocabulary {
    let names: Vec<String> = (1..=vocab_size as Code)
        .map(|i| synthetic_mnemonic(i, vocab_size))
        .collect();
    Vocabulary::build(&[names]).expect("vocab_size >= 1")
}

/// True if `motif` occurs as a contiguous run in `codes`.
pub fn contains_motif(codes: &[Code], motif: &[Code]) -> bool {
    !motif.is_empty() && codes.windows(motif.len()).any(|w| w == motif)
}

fn random_code(rng: &mut Rng, vocab_size: usize) -> Code {
    rng.gen_range(1..=vocab_size as Code)
}

/// Uniform tokens, never completing the motif.
fn motif_free(rng: &mut Rng, len: usize, vocab_size: usize, motif: &[Code]) -> Vec<Code> {
    let k = motif.len();
    let last = motif[k - 1];
    let mut out: Vec<Code> = Vec::with_capacity(len);
    while out.len() < len {
        let mut c = random_code(rng, vocab_size);
        let n = out.len();
        if c == last && n + 1 >= k && out[n + 1 - k..] == motif[..k - 1] {
            while c == last {
                c = random_code(rng, vocab_size);
            }
        }
        out.push(c);
    }
    out
}

pub fn generate_synthetic_corpus(params: &SynthParams) -> Result<SyntheticCorpus> {
    params.validate()?;
    let mut rng = seeded(params.seed);
    let (lo, hi) = params.length_range;
    let mut sequences = Vec::with_capacity(params.n_benign + params.n_malicious);

    let width = (params.n_benign.max(params.n_malicious).max(1) - 1)
        .to_string()
        .len()
        .max(4);
    for i in 0..params.n_benign {
        let len = rng.gen_range(lo..=hi);
        sequences.push(OpcodeSequence {
            file_id: format!("b{i:0width$}"),
            label: Label::Benign,
            codes: motif_free(&mut rng, len, params.vocab_size, &params.motif),
        });
    }
    for i in 0..params.n_malicious {
        let len = rng.gen_range(lo..=hi);
        let planted = params.motif_rate >= 1.0 || rng.gen::<f64>() < params.motif_rate;
        let codes = if planted {
            let mut codes: Vec<Code> = (0..len)
                .map(|_| random_code(&mut rng, params.vocab_size))
                .collect();
            let pos = rng.gen_range(0..=len - params.motif.len());
            codes[pos..pos + params.motif.len()].copy_from_slice(&params.motif);
            codes
        } else {
            motif_free(&mut rng, len, params.vocab_size, &params.motif)
        };
        sequences.push(OpcodeSequence {
            file_id: format!("m{i:0width$}"),
            label: Label::Malicious,
            codes,
        });
    }

    let manifest = CorpusManifest {
        records: sequences
            .iter()
            .map(|s| ManifestRecord {
                file_id: s.file_id.clone(),
                path: format!("ops/{}.ops", s.file_id).into(),
                label: s.label,
            })
            .collect(),
        provenance: Provenance::Synthetic,
    };
    Ok(SyntheticCorpus {
        manifest,
        sequences,
        vocab: synthetic_vocabulary(params.vocab_size),
    })
}
