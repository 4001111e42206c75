use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::corpus::{Label, OpcodeSequence};
use crate::error::{Error, Result};

/// Percentile markers reported for each class.
pub const PERCENTILE_MARKERS: [f64; 10] =
    [0.01, 0.05, 0.10, 0.25, 0.50, 0.75, 0.90, 0.95, 0.99, 1.0];

/// Linear interpolation between closest ranks on sorted data (the "type 7"
/// estimator): `h = (n - 1)·p`, then interpolate between `x[⌊h⌋]` and the next.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Summary of a series of per-file op-code counts.
#[derive(Debug, Clone, PartialEq)]
pub struct LengthStats {
    pub counts: Vec<usize>,
    pub mean: f64,
    pub q1: f64,
    pub q3: f64,
    pub percentiles: Vec<(f64, f64)>,
    /// `mean + 1.0·(q3 - q1)`
    pub max_threshold: f64,
    sorted: Vec<f64>,
}

impl LengthStats {
    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::invalid("length statistics of an empty class"));
        }
        let mut sorted: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        sorted.sort_by(f64::total_cmp);
        let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
        let q1 = quantile_sorted(&sorted, 0.25);
        let q3 = quantile_sorted(&sorted, 0.75);
        let percentiles = PERCENTILE_MARKERS
            .iter()
            .map(|&p| (p, quantile_sorted(&sorted, p)))
            .collect();
        Ok(LengthStats {
            counts: counts.to_vec(),
            mean,
            q1,
            q3,
            percentiles,
            max_threshold: mean + 1.0 * (q3 - q1),
            sorted,
        })
    }

    pub fn quantile(&self, p: f64) -> f64 {
        quantile_sorted(&self.sorted, p)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Per-class length statistics. Every class present in `sequences` must be
/// non-empty; both classes must be present.
pub fn length_stats(sequences: &[OpcodeSequence]) -> Result<BTreeMap<Label, LengthStats>> {
    let mut out = BTreeMap::new();
    for label in [Label::Benign, Label::Malicious] {
        let counts: Vec<usize> = sequences
            .iter()
            .filter(|s| s.label == label)
            .map(|s| s.codes.len())
            .collect();
        if counts.is_empty() {
            return Err(Error::invalid(format!("class {} is empty", label.name())));
        }
        out.insert(label, LengthStats::from_counts(&counts)?);
    }
    Ok(out)
}

fn marker_name(p: f64) -> String {
    format!("{:02}", (p * 100.0).round() as u32)
}

/// `class<TAB>percentile<TAB>value` lines over the marker set.
pub fn stats_report(stats: &BTreeMap<Label, LengthStats>) -> String {
    let mut out = String::new();
    for (label, s) in stats {
        for &(p, v) in &s.percentiles {
            let _ = writeln!(out, "{}\t{}\t{}", label.name(), marker_name(p), v);
        }
    }
    out
}

/// How the fixed sequence length is chosen from the length distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LengthSpec {
    Quantile(f64),
    Mean,
}

impl fmt::Display for LengthSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LengthSpec::Mean => f.write_str("MEAN"),
            LengthSpec::Quantile(p) if p == 1.0 => f.write_str("Q(1.0)"),
            LengthSpec::Quantile(p) if (p * 100.0).fract() == 0.0 => write!(f, "Q({p:.2})"),
            LengthSpec::Quantile(p) => write!(f, "Q({p})"),
        }
    }
}

impl FromStr for LengthSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("mean") {
            return Ok(LengthSpec::Mean);
        }
        let inner = s
            .strip_prefix("Q(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| Error::invalid(format!("unknown length spec `{s}`")))?;
        let p: f64 = inner
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("unknown length spec `{s}`")))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("quantile {p} outside [0, 1]")));
        }
        Ok(LengthSpec::Quantile(p))
    }
}

/// Resolves a length spec against combined statistics, rounding up.
pub fn resolve_sequence_length(stats: &LengthStats, spec: LengthSpec) -> usize {
    let v = match spec {
        LengthSpec::Mean => stats.mean,
        LengthSpec::Quantile(p) => stats.quantile(p),
    };
    (v.ceil() as usize).max(1)
}

/// One row of the log10 length histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramRow {
    pub label: Label,
    pub bin_low: f64,
    pub bin_high: f64,
    pub frequency: usize,
}

fn snap(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

/// Histogram of `log10(length)` per class with fixed bin width. Bins run from
/// the lowest to the highest occupied bin, including empty ones in between.
pub fn log10_length_histogram(
    stats: &BTreeMap<Label, LengthStats>,
    bin_width: f64,
) -> Result<Vec<HistogramRow>> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::invalid(format!(
            "bin width {bin_width} must be positive"
        )));
    }
    let mut rows = Vec::new();
    for (&label, s) in stats {
        if s.counts.contains(&0) {
            return Err(Error::invalid(format!(
                "class {} has zero-length files; drop them before the histogram",
                label.name()
            )));
        }
        let mut bins: BTreeMap<i64, usize> = BTreeMap::new();
        for &c in &s.counts {
            let idx = ((c as f64).log10() / bin_width + 1e-9).floor() as i64;
            *bins.entry(idx).or_default() += 1;
        }
        let (Some(&first), Some(&last)) = (bins.keys().next(), bins.keys().next_back()) else {
            continue;
        };
        for idx in first..=last {
            rows.push(HistogramRow {
                label,
                bin_low: snap(idx as f64 * bin_width),
                bin_high: snap((idx + 1) as f64 * bin_width),
                frequency: bins.get(&idx).copied().unwrap_or(0),
            });
        }
    }
    Ok(rows)
}

pub fn histogram_csv(rows: &[HistogramRow]) -> String {
    let mut out = String::from("class,bin_low,bin_high,frequency\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.label.name(),
            r.bin_low,
            r.bin_high,
            r.frequency
        );
    }
    out
}
