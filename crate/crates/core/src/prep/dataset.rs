use rand::seq::SliceRandom;

use crate::corpus::{Code, Label, OpcodeSequence, PAD};
use crate::error::{Error, Result};
use crate::nn::rng::seeded;

/// Forces `codes` to exactly `len` entries: longer sequences keep their head,
/// shorter ones are left-padded with [`PAD`].
pub fn trim_pad(codes: &[Code], len: usize) -> Vec<Code> {
    if codes.len() >= len {
        return codes[..len].to_vec();
    }
    let mut out = vec![PAD; len - codes.len()];
    out.extend_from_slice(codes);
    out
}

fn class_indices(data: &[OpcodeSequence], label: Label) -> Vec<usize> {
    data.iter()
        .enumerate()
        .filter(|(_, s)| s.label == label)
        .map(|(i, _)| i)
        .collect()
}

/// Randomly undersamples the majority class, without replacement, down to the
/// minority count. Relative order of the survivors is preserved.
pub fn balance_classes(data: Vec<OpcodeSequence>, seed: u64) -> Result<Vec<OpcodeSequence>> {
    let benign = class_indices(&data, Label::Benign);
    let malicious = class_indices(&data, Label::Malicious);
    if benign.is_empty() || malicious.is_empty() {
        return Err(Error::invalid("cannot balance: a class is empty"));
    }
    let (mut majority, minority) = if malicious.len() >= benign.len() {
        (malicious, benign)
    } else {
        (benign, malicious)
    };
    let mut rng = seeded(seed);
    majority.shuffle(&mut rng);
    majority.truncate(minority.len());

    let mut keep = vec![false; data.len()];
    for &i in majority.iter().chain(&minority) {
        keep[i] = true;
    }
    Ok(data
        .into_iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(s, _)| s)
        .collect())
}

/// Stratified split: `round(fraction · n_class)` of each class goes to test.
pub fn split_dataset(
    data: Vec<OpcodeSequence>,
    fraction: f64,
    seed: u64,
) -> Result<(Vec<OpcodeSequence>, Vec<OpcodeSequence>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!(
            "split fraction {fraction} outside (0, 1)"
        )));
    }
    if data.is_empty() {
        return Err(Error::invalid("cannot split an empty dataset"));
    }
    let mut rng = seeded(seed);
    let mut is_test = vec![false; data.len()];
    for label in [Label::Benign, Label::Malicious] {
        let mut idx = class_indices(&data, label);
        let n_test = (idx.len() as f64 * fraction).round() as usize;
        idx.shuffle(&mut rng);
        for &i in &idx[..n_test] {
            is_test[i] = true;
        }
    }
    let (test, train): (Vec<_>, Vec<_>) = data.into_iter().zip(is_test).partition(|(_, t)| *t);
    Ok((
        train.into_iter().map(|(s, _)| s).collect(),
        test.into_iter().map(|(s, _)| s).collect(),
    ))
}
