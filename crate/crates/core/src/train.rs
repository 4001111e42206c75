//! Mini-batch training with Adam, global-norm clipping, per-epoch validation
//! and early stopping with best-epoch restoration.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::corpus::{Code, Label};
use crate::error::{Error, Result};
use crate::lstm::{network_backward, network_forward, predict, Mode, NetworkParams};
use crate::nn::{clip_global_norm, derive_seed, seeded, AdamConfig, AdamState, ParamSet, Rng};

/// A differentiable binary classifier the training loop can drive.
pub trait Classifier: ParamSet + Clone + Send + Sync {
    type Input: Sync;

    /// Forward and backward pass for one example, accumulating into `grads`.
    /// `rng` is `Some` in training mode.
    fn loss_and_grad(
        &self,
        x: &Self::Input,
        y: Label,
        rng: Option<&mut Rng>,
        grads: &mut Self,
    ) -> Result<f64>;

    /// Evaluation-mode probability of the malicious class.
    fn probability(&self, x: &Self::Input) -> Result<f64>;
}

impl Classifier for NetworkParams {
    type Input = Vec<Code>;

    fn loss_and_grad(
        &self,
        x: &Vec<Code>,
        y: Label,
        rng: Option<&mut Rng>,
        grads: &mut Self,
    ) -> Result<f64> {
        let mode = match rng {
            Some(r) => Mode::Train(r),
            None => Mode::Eval,
        };
        let cache = network_forward(self, x, mode)?;
        network_backward(self, &cache, y, grads)
    }

    fn probability(&self, x: &Vec<Code>) -> Result<f64> {
        predict(self, x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example<X> {
    pub x: X,
    pub y: Label,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub min_epochs: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    pub clip_norm: f64,
    pub patience: usize,
    pub min_delta: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            min_epochs: 5,
            max_epochs: 10,
            seed: 42,
            adam: AdamConfig::default(),
            clip_norm: 5.0,
            patience: 2,
            min_delta: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Percentage in [0, 100].
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<M> {
    /// Parameters of the lowest-validation-loss epoch.
    pub model: M,
    pub best_epoch: usize,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub history: Vec<EpochRecord>,
}

/// Examples per parallel work unit. Partial sums are combined in a fixed
/// order, so results do not depend on the thread count.
const CHUNK: usize = 4;

/// Mean BCE and accuracy (percent, threshold 0.5) in evaluation mode.
pub fn evaluate<M: Classifier>(model: &M, data: &[Example<M::Input>]) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(Error::invalid("empty evaluation set"));
    }
    let per: Vec<(f64, bool)> = data
        .par_iter()
        .map(|e| {
            let p = model.probability(&e.x)?;
            let (loss, _) = crate::nn::bce_loss(p, e.y.as_f64())?;
            Ok((loss, (p >= 0.5) == (e.y == Label::Malicious)))
        })
        .collect::<Result<_>>()?;
    let loss = per.iter().map(|(l, _)| l).sum::<f64>() / data.len() as f64;
    let correct = per.iter().filter(|(_, c)| *c).count();
    Ok((loss, 100.0 * correct as f64 / data.len() as f64))
}

/// Mean loss and mean gradient over `batch`. `seeds[i]` seeds the dropout
/// stream of `batch[i]`; `None` runs in evaluation mode.
fn batch_gradient<M: Classifier>(
    model: &M,
    batch: &[&Example<M::Input>],
    seeds: Option<&[u64]>,
) -> Result<(f64, M)> {
    let partials: Vec<(f64, M)> = batch
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(ci, chunk)| {
            let mut grads = model.zeros_like();
            let mut loss = 0.0;
            for (k, e) in chunk.iter().enumerate() {
                let mut rng = seeds.map(|s| seeded(s[ci * CHUNK + k]));
                loss += model.loss_and_grad(&e.x, e.y, rng.as_mut(), &mut grads)?;
            }
            Ok((loss, grads))
        })
        .collect::<Result<_>>()?;
    let mut iter = partials.into_iter();
    let (mut loss, mut grads) = iter.next().ok_or_else(|| Error::invalid("empty batch"))?;
    for (l, g) in iter {
        loss += l;
        grads.add_assign(&g);
    }
    let n = batch.len() as f64;
    grads.scale(1.0 / n);
    Ok((loss / n, grads))
}

/// One optimizer step on `batch`: mean gradient, global-norm clipping, Adam.
/// Returns the mean batch loss before the update.
pub fn train_step<M: Classifier>(
    model: &mut M,
    batch: &[&Example<M::Input>],
    adam: &mut AdamState,
    clip_norm: f64,
    dropout_seeds: Option<&[u64]>,
) -> Result<f64> {
    let (loss, mut grads) = batch_gradient(model, batch, dropout_seeds)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite("batch loss".into()));
    }
    clip_global_norm(&mut grads, clip_norm);
    adam.step(model, &grads)?;
    Ok(loss)
}

fn check_config(cfg: &TrainConfig) -> Result<()> {
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    if cfg.max_epochs == 0 || cfg.min_epochs > cfg.max_epochs {
        return Err(Error::invalid(format!(
            "epoch window {}..{} is empty",
            cfg.min_epochs, cfg.max_epochs
        )));
    }
    if !(cfg.adam.lr >= 0.0 && cfg.adam.lr.is_finite()) {
        return Err(Error::invalid(format!("learning rate {}", cfg.adam.lr)));
    }
    Ok(())
}

/// Trains `model` on `train`, validating on `val` after every epoch.
///
/// Stops after `min_epochs` once validation loss has failed to improve by
/// more than `min_delta` for `patience` consecutive epochs, and returns the
/// parameters of the lowest-validation-loss epoch.
pub fn train<M: Classifier>(
    model: M,
    train: &[Example<M::Input>],
    val: &[Example<M::Input>],
    cfg: &TrainConfig,
) -> Result<TrainOutcome<M>> {
    check_config(cfg)?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::invalid("empty train or validation partition"));
    }
    let mut model = model;
    let mut adam = AdamState::new(&model, cfg.adam);
    let mut history = Vec::new();
    let mut best: Option<(usize, f64, f64, M)> = None;
    let mut reference = f64::INFINITY;
    let mut stale = 0;

    for epoch in 1..=cfg.max_epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut seeded(derive_seed(cfg.seed, &[epoch as u64])));
        let mut total = 0.0;
        for (bi, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&Example<M::Input>> = idx.iter().map(|&i| &train[i]).collect();
            let seeds: Vec<u64> = (0..idx.len())
                .map(|k| derive_seed(cfg.seed, &[epoch as u64, (bi * cfg.batch_size + k) as u64]))
                .collect();
            let loss = match train_step(&mut model, &batch, &mut adam, cfg.clip_norm, Some(&seeds))
            {
                Ok(l) => l,
                Err(Error::NonFinite(_)) => return Err(Error::Diverged { epoch }),
                Err(e) => return Err(e),
            };
            total += loss * idx.len() as f64;
        }
        let train_loss = total / train.len() as f64;
        let (val_loss, val_accuracy) = evaluate(&model, val).map_err(|e| match e {
            Error::NonFinite(_) => Error::Diverged { epoch },
            other => other,
        })?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_accuracy,
        });
        if best.as_ref().is_none_or(|b| val_loss < b.1) {
            best = Some((epoch, val_loss, val_accuracy, model.clone()));
        }
        if val_loss < reference - cfg.min_delta {
            reference = val_loss;
            stale = 0;
        } else {
            stale += 1;
        }
        if epoch >= cfg.min_epochs && stale >= cfg.patience {
            break;
        }
    }

    let (best_epoch, val_loss, val_accuracy, model) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        model,
        best_epoch,
        val_loss,
        val_accuracy,
        history,
    })
}
