use crate::error::{Error, Result};
use crate::nn::activation::sigmoid;

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` before the log.
pub const PROB_EPS: f64 = 1e-12;

fn check_label(y: f64) -> Result<()> {
    if y == 0.0 || y == 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("label must be 0 or 1, got {y}")))
    }
}

/// Binary cross entropy of probability `p` against label `y`, together with
/// `d loss / d p`.
pub fn bce_loss(p: f64, y: f64) -> Result<(f64, f64)> {
    check_label(y)?;
    if !p.is_finite() {
        return Err(Error::NonFinite("probability".into()));
    }
    let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    let loss = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
    let grad = -y / p + (1.0 - y) / (1.0 - p);
    Ok((loss, grad))
}

/// BCE applied to `sigmoid(logit)`. Returns `(p, loss, d loss / d logit)`;
/// the logit gradient simplifies to `p - y`.
pub fn bce_with_logit(logit: f64, y: f64) -> Result<(f64, f64, f64)> {
    if !logit.is_finite() {
        return Err(Error::NonFinite("output logit".into()));
    }
    let p = sigmoid(logit);
    let (loss, _) = bce_loss(p, y)?;
    Ok((p, loss, p - y))
}

/// Mean BCE over a batch.
pub fn mean_bce(probs: &[f64], labels: &[f64]) -> Result<f64> {
    if probs.len() != labels.len() {
        return Err(Error::shape("labels", probs.len(), labels.len()));
    }
    if probs.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let mut total = 0.0;
    for (&p, &y) in probs.iter().zip(labels) {
        total += bce_loss(p, y)?.0;
    }
    Ok(total / probs.len() as f64)
}
