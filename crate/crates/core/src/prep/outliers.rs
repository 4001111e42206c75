use std::fmt::Write as _;

use crate::corpus::{Label, OpcodeSequence};
use crate::error::{Error, Result};
use crate::prep::stats::{quantile_sorted, LengthStats};

/// Cleaning rules applied before fixed-length encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct CleaningPlan {
    /// Drop files shorter than this quantile of their class's non-null
    /// lengths. `None` disables the rule.
    pub floor_quantile: Option<f64>,
    /// Malicious files shorter than this are dropped.
    pub min_keep_malicious: usize,
}

impl Default for CleaningPlan {
    fn default() -> Self {
        CleaningPlan {
            floor_quantile: Some(0.01),
            min_keep_malicious: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RemovalReason {
    Null,
    BelowFloor { floor: f64 },
    BelowMinLength { min: usize },
    AboveThreshold { iteration: usize, threshold: f64 },
}

impl RemovalReason {
    fn describe(&self) -> String {
        match *self {
            RemovalReason::Null => "null".into(),
            RemovalReason::BelowFloor { floor } => format!("below_floor({floor})"),
            RemovalReason::BelowMinLength { min } => format!("below_min_length({min})"),
            RemovalReason::AboveThreshold {
                iteration,
                threshold,
            } => format!("above_threshold(iter={iteration},t={threshold})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Removal {
    pub file_id: String,
    pub label: Label,
    pub reason: RemovalReason,
    pub length: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RemovalReport {
    pub removed: Vec<Removal>,
    /// Threshold iterations run per class, counting the final stable pass.
    pub iterations: Vec<(Label, usize)>,
    /// Last computed threshold per class.
    pub final_thresholds: Vec<(Label, f64)>,
}

impl RemovalReport {
    /// `file_id<TAB>reason<TAB>length` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.removed {
            let _ = writeln!(out, "{}\t{}\t{}", r.file_id, r.reason.describe(), r.length);
        }
        out
    }
}

/// Outcome of the iterated threshold rule on a bare length series.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdIteration {
    /// `keep[i]` is false for entries dropped at some iteration.
    pub keep: Vec<bool>,
    /// Threshold computed at each iteration, the last one removing nothing.
    pub thresholds: Vec<f64>,
}

/// Repeatedly drops lengths strictly above `mean + (q3 - q1)` of the
/// survivors until a pass removes nothing.
pub fn iterate_threshold(lengths: &[usize]) -> Result<ThresholdIteration> {
    let mut keep = vec![true; lengths.len()];
    let mut thresholds = Vec::new();
    loop {
        let alive: Vec<usize> = lengths
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(&l, _)| l)
            .collect();
        let stats = LengthStats::from_counts(&alive)?;
        let t = stats.max_threshold;
        thresholds.push(t);
        let mut dropped = false;
        for (k, &l) in keep.iter_mut().zip(lengths) {
            if *k && l as f64 > t {
                *k = false;
                dropped = true;
            }
        }
        if !dropped {
            return Ok(ThresholdIteration { keep, thresholds });
        }
    }
}

/// Removes null files, short files and length outliers, class by class.
///
/// Null, floor and minimum-length rules run once; the threshold rule is then
/// iterated to a fixed point on each class separately.
pub fn remove_outliers(
    sequences: Vec<OpcodeSequence>,
    plan: &CleaningPlan,
) -> Result<(Vec<OpcodeSequence>, RemovalReport)> {
    let mut report = RemovalReport::default();
    let mut retained: Vec<OpcodeSequence> = Vec::with_capacity(sequences.len());
    let mut by_class: [Vec<OpcodeSequence>; 2] = [Vec::new(), Vec::new()];
    for s in sequences {
        by_class[s.label as usize].push(s);
    }

    for (class, seqs) in by_class.into_iter().enumerate() {
        let label = Label::try_from(class as u8)?;
        if seqs.is_empty() {
            return Err(Error::ClassEliminated(label.as_u8()));
        }
        let mut record = |s: &OpcodeSequence, reason| {
            report.removed.push(Removal {
                file_id: s.file_id.clone(),
                label,
                reason,
                length: s.codes.len(),
            })
        };

        let mut kept: Vec<OpcodeSequence> = Vec::with_capacity(seqs.len());
        for s in seqs {
            if s.codes.is_empty() {
                record(&s, RemovalReason::Null);
            } else {
                kept.push(s);
            }
        }

        if let (Some(q), false) = (plan.floor_quantile, kept.is_empty()) {
            let mut lens: Vec<f64> = kept.iter().map(|s| s.codes.len() as f64).collect();
            lens.sort_by(f64::total_cmp);
            let floor = quantile_sorted(&lens, q);
            kept.retain(|s| {
                let short = (s.codes.len() as f64) < floor;
                if short {
                    record(s, RemovalReason::BelowFloor { floor });
                }
                !short
            });
        }

        if label == Label::Malicious {
            let min = plan.min_keep_malicious;
            kept.retain(|s| {
                let short = s.codes.len() < min;
                if short {
                    record(s, RemovalReason::BelowMinLength { min });
                }
                !short
            });
        }

        if kept.is_empty() {
            return Err(Error::ClassEliminated(label.as_u8()));
        }

        let lengths: Vec<usize> = kept.iter().map(|s| s.codes.len()).collect();
        let it = iterate_threshold(&lengths)?;
        // thresholds[k] produced the drops of iteration k + 1
        for (s, &keep) in kept.iter().zip(&it.keep) {
            if !keep {
                let l = s.codes.len() as f64;
                let iteration = it.thresholds.iter().position(|&t| l > t).unwrap_or(0);
                record(
                    s,
                    RemovalReason::AboveThreshold {
                        iteration: iteration + 1,
                        threshold: it.thresholds[iteration],
                    },
                );
            }
        }
        report.iterations.push((label, it.thresholds.len()));
        report
            .final_thresholds
            .push((label, *it.thresholds.last().expect("at least one pass")));
        retained.extend(
            kept.into_iter()
                .zip(it.keep)
                .filter(|(_, k)| *k)
                .map(|(s, _)| s),
        );
    }
    Ok((retained, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seqs(label: Label, lengths: &[usize]) -> Vec<OpcodeSequence> {
        lengths
            .iter()
            .enumerate()
            .map(|(i, &n)| OpcodeSequence {
                file_id: format!("{}{i}", label.name()),
                label,
                codes: vec![1; n],
            })
            .collect()
    }

    fn no_floor() -> CleaningPlan {
        CleaningPlan {
            floor_quantile: None,
            min_keep_malicious: 0,
        }
    }

    #[test]
    fn one_to_ten_is_already_stable() {
        let lens: Vec<usize> = (1..=10).collect();
        let it = iterate_threshold(&lens).unwrap();
        assert_eq!(it.thresholds, vec![10.0]);
        assert!(it.keep.iter().all(|&k| k));
    }

    #[test]
    fn spike_dropped_in_first_iteration() {
        let it = iterate_threshold(&[7, 7, 7, 7, 700]).unwrap();
        assert_eq!(it.keep, vec![true, true, true, true, false]);
        assert_eq!(it.thresholds.len(), 2);
        assert!((it.thresholds[0] - 145.6).abs() < 1e-12);
        assert_eq!(it.thresholds[1], 7.0);
    }

    #[test]
    fn pipeline_rules_and_report() {
        let mut input = seqs(Label::Benign, &[0, 50, 60, 70, 80, 5000]);
        input.extend(seqs(Label::Malicious, &[0, 90, 150, 160, 170, 180]));
        let (kept, report) = remove_outliers(input, &CleaningPlan::default()).unwrap();
        let reason = |id: &str| {
            report
                .removed
                .iter()
                .find(|r| r.file_id == id)
                .map(|r| r.reason)
        };
        assert_eq!(reason("benign0"), Some(RemovalReason::Null));
        assert_eq!(reason("malicious0"), Some(RemovalReason::Null));
        assert!(matches!(
            reason("benign1"),
            Some(RemovalReason::BelowFloor { .. })
        ));
        assert!(matches!(
            reason("malicious1"),
            Some(RemovalReason::BelowFloor { .. })
        ));
        assert!(matches!(
            reason("benign5"),
            Some(RemovalReason::AboveThreshold { iteration: 1, .. })
        ));
        assert_eq!(kept.len(), 12 - report.removed.len());
        let text = report.to_text();
        assert!(text.contains("benign0\tnull\t0\n"), "{text}");
    }

    #[test]
    fn malicious_min_length_clip() {
        let mut input = seqs(Label::Benign, &[10, 11, 12]);
        input.extend(seqs(Label::Malicious, &[99, 100, 101, 102]));
        let plan = CleaningPlan {
            floor_quantile: None,
            min_keep_malicious: 100,
        };
        let (_, report) = remove_outliers(input, &plan).unwrap();
        assert_eq!(report.removed.len(), 1);
        assert_eq!(report.removed[0].file_id, "malicious0");
        assert_eq!(
            report.removed[0].reason,
            RemovalReason::BelowMinLength { min: 100 }
        );
    }

    #[test]
    fn eliminated_class_is_error() {
        let mut input = seqs(Label::Benign, &[10, 11]);
        input.extend(seqs(Label::Malicious, &[5, 6]));
        let err = remove_outliers(input, &CleaningPlan::default()).unwrap_err();
        assert!(err.to_string().contains("eliminated by outlier removal"));
        assert!(remove_outliers(seqs(Label::Benign, &[3]), &no_floor()).is_err());
    }

    proptest! {
        #[test]
        fn threshold_loop_terminates_and_is_idempotent(
            lens in proptest::collection::vec(1usize..5000, 1..120)
        ) {
            let it = iterate_threshold(&lens).unwrap();
            prop_assert!(it.thresholds.len() <= lens.len() + 1);
            let survivors: Vec<usize> = lens.iter().zip(&it.keep).filter(|(_, &k)| k).map(|(&l, _)| l).collect();
            prop_assert!(!survivors.is_empty());
            let again = iterate_threshold(&survivors).unwrap();
            prop_assert!(again.keep.iter().all(|&k| k));
            prop_assert_eq!(again.thresholds.len(), 1);
        }

        #[test]
        fn pipeline_idempotent_without_floor(
            b in proptest::collection::vec(0usize..3000, 1..60),
            m in proptest::collection::vec(0usize..3000, 1..60),
        ) {
            let mut input = seqs(Label::Benign, &b);
            input.extend(seqs(Label::Malicious, &m));
            let plan = CleaningPlan { floor_quantile: None, min_keep_malicious: 100 };
            if let Ok((kept, _)) = remove_outliers(input, &plan) {
                let (again, report) = remove_outliers(kept.clone(), &plan).unwrap();
                prop_assert!(report.removed.is_empty());
                prop_assert_eq!(again, kept);
            }
        }
    }
}
