//! Length statistics, outlier removal, fixed-length encoding, class balancing
//! and train/test splitting.

pub mod bundle;
pub mod dataset;
pub mod outliers;
pub mod stats;

use std::collections::BTreeMap;

use crate::corpus::{Label, OpcodeSequence};
use crate::error::{Error, Result};

pub use bundle::{load_bundle, write_bundle, Bundle, PrepMeta};
pub use dataset::{balance_classes, split_dataset, trim_pad};
pub use outliers::{
    iterate_threshold, remove_outliers, CleaningPlan, RemovalReason, RemovalReport,
};
pub use stats::{
    length_stats, log10_length_histogram, resolve_sequence_length, LengthSpec, LengthStats,
    PERCENTILE_MARKERS,
};

#[derive(Debug, Clone, PartialEq)]
pub struct PrepPlan {
    pub length_spec: LengthSpec,
    pub cleaning: CleaningPlan,
    pub seed: u64,
    pub balance: bool,
    /// Share of each class held out for validation.
    pub split_fraction: f64,
}

impl Default for PrepPlan {
    fn default() -> Self {
        PrepPlan {
            length_spec: LengthSpec::Quantile(0.75),
            cleaning: CleaningPlan::default(),
            seed: 42,
            balance: true,
            split_fraction: 0.25,
        }
    }
}

/// Everything produced by [`prepare`]. Sequences are kept at their natural
/// length; trim-pad happens per model configuration.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Vec<OpcodeSequence>,
    pub test: Vec<OpcodeSequence>,
    pub removal: RemovalReport,
    /// Per-class statistics of the non-null input lengths.
    pub input_stats: BTreeMap<Label, LengthStats>,
    /// Lengths of every file that survived cleaning, before balancing.
    pub cleaned_lengths: Vec<(String, Label, usize)>,
    pub combined: LengthStats,
    pub sequence_length: usize,
}

/// Runs cleaning, length resolution, balancing and splitting.
pub fn prepare(sequences: Vec<OpcodeSequence>, plan: &PrepPlan) -> Result<Prepared> {
    if !(plan.split_fraction > 0.0 && plan.split_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "split fraction {} outside (0, 1)",
            plan.split_fraction
        )));
    }
    let non_null: Vec<OpcodeSequence> = sequences
        .iter()
        .filter(|s| !s.codes.is_empty())
        .cloned()
        .collect();
    let input_stats = length_stats(&non_null)?;

    let (cleaned, removal) = remove_outliers(sequences, &plan.cleaning)?;
    let cleaned_lengths: Vec<(String, Label, usize)> = cleaned
        .iter()
        .map(|s| (s.file_id.clone(), s.label, s.codes.len()))
        .collect();
    let lengths: Vec<usize> = cleaned_lengths.iter().map(|(_, _, l)| *l).collect();
    let combined = LengthStats::from_counts(&lengths)?;
    let sequence_length = resolve_sequence_length(&combined, plan.length_spec);

    let data = if plan.balance {
        balance_classes(cleaned, plan.seed)?
    } else {
        cleaned
    };
    let (train, test) = split_dataset(data, plan.split_fraction, plan.seed)?;
    Ok(Prepared {
        train,
        test,
        removal,
        input_stats,
        cleaned_lengths,
        combined,
        sequence_length,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic_corpus, SynthParams, PAD};

    #[test]
    fn synthetic_prep_end_to_end() {
        let c = generate_synthetic_corpus(&SynthParams {
            n_benign: 60,
            n_malicious: 140,
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
        let count = |d: &[OpcodeSequence], l| d.iter().filter(|s| s.label == l).count();
        let all: Vec<_> = p.train.iter().chain(&p.test).cloned().collect();
        assert_eq!(count(&all, Label::Benign), count(&all, Label::Malicious));
        let l = p.sequence_length;
        assert_eq!(
            l,
            resolve_sequence_length(&p.combined, LengthSpec::Quantile(0.75))
        );
        for s in &all {
            let fixed = trim_pad(&s.codes, l);
            assert_eq!(fixed.len(), l);
            let pads = fixed.iter().take_while(|&&c| c == PAD).count();
            assert!(fixed[pads..].iter().all(|&c| c != PAD));
        }
    }
}
