use std::path::Path;

use rand::Rng as _;

use crate::checkpoint::{read_checkpoint, write_checkpoint};
use crate::corpus::{Code, Label, PAD};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::lstm::cell::{
    glorot, lstm_layer_backward, lstm_layer_forward, LstmLayerParams, LstmStepState,
};
use crate::nn::activation::ActivationKind;
use crate::nn::dropout::dropout_mask;
use crate::nn::loss::bce_with_logit;
use crate::nn::matrix::{dot, Matrix};
use crate::nn::params::ParamSet;
use crate::nn::rng::{seeded, Rng};

pub const CHECKPOINT_HEADER: &str = "OPSEQIDS-CKPT v1";

/// Shape of an embedding + stacked LSTM + dense head classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    /// Number of real op-codes; the embedding has two more rows (PAD, UNK).
    pub vocab_size: usize,
    pub embedding_size: usize,
    /// LSTM units per layer.
    pub hidden_size: usize,
    pub num_layers: usize,
    /// Width of the dense layer between the last LSTM step and the output.
    pub out_dim: usize,
    /// Candidate activation σ_c: sigmoid or tanh.
    pub act_fn: ActivationKind,
    pub dropout: f64,
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0
            || self.embedding_size == 0
            || self.hidden_size == 0
            || self.num_layers == 0
            || self.out_dim == 0
        {
            return Err(Error::invalid(format!(
                "network dimensions must be positive: {self:?}"
            )));
        }
        if !matches!(self.act_fn, ActivationKind::Sigmoid | ActivationKind::Tanh) {
            return Err(Error::invalid(format!(
                "LSTM activation must be sigmoid or tanh, got {}",
                self.act_fn
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }

    /// Closed-form trainable parameter count:
    /// `(V+2)·E + Σ_l 4·(h·d_l + h·h + h) + OutDim·h + OutDim + OutDim + 1`.
    pub fn param_count(&self) -> usize {
        self.checked_param_count()
            .expect("parameter count overflows usize")
    }

    pub fn checked_param_count(&self) -> Option<usize> {
        let (e, h) = (self.embedding_size, self.hidden_size);
        let embedding = self.vocab_size.checked_add(2)?.checked_mul(e)?;
        let first = h
            .checked_mul(e)?
            .checked_add(h.checked_mul(h)?)?
            .checked_add(h)?;
        let rest = h.checked_mul(h)?.checked_mul(2)?.checked_add(h)?;
        let lstm = first
            .checked_add(rest.checked_mul(self.num_layers.saturating_sub(1))?)?
            .checked_mul(4)?;
        let head = self
            .out_dim
            .checked_mul(h)?
            .checked_add(self.out_dim.checked_mul(2)?)?;
        embedding
            .checked_add(lstm)?
            .checked_add(head)?
            .checked_add(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub config: NetworkConfig,
    /// `(vocab_size + 2) × embedding_size`; row 0 is PAD, row `vocab_size+1` UNK.
    pub embedding: Matrix,
    pub layers: Vec<LstmLayerParams>,
    pub dense_w: Matrix,
    pub dense_b: Vec<f64>,
    pub out_w: Vec<f64>,
    /// Single-element output bias.
    pub out_b: Vec<f64>,
}

/// Dense head activation.
pub const DENSE_ACTIVATION: ActivationKind = ActivationKind::Tanh;

const EMBEDDING_INIT: f64 = 0.05;

impl NetworkParams {
    pub fn zeros(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let (e, h) = (config.embedding_size, config.hidden_size);
        let layers = (0..config.num_layers)
            .map(|l| LstmLayerParams::zeros(if l == 0 { e } else { h }, h))
            .collect();
        Ok(NetworkParams {
            embedding: Matrix::zeros(config.vocab_size + 2, e),
            layers,
            dense_w: Matrix::zeros(config.out_dim, h),
            dense_b: vec![0.0; config.out_dim],
            out_w: vec![0.0; config.out_dim],
            out_b: vec![0.0],
            config,
        })
    }

    /// Seeded initialization: Glorot-uniform matrices, forget bias 1, other
    /// biases 0, small uniform embeddings and an all-zero PAD row.
    pub fn init(config: NetworkConfig, seed: u64) -> Result<Self> {
        let mut net = NetworkParams::zeros(config)?;
        let mut rng = seeded(seed);
        for v in net.embedding.data_mut() {
            *v = rng.gen_range(-EMBEDDING_INIT..EMBEDDING_INIT);
        }
        net.embedding.row_mut(PAD as usize).fill(0.0);
        let (e, h) = (net.config.embedding_size, net.config.hidden_size);
        for (l, layer) in net.layers.iter_mut().enumerate() {
            *layer = LstmLayerParams::init(if l == 0 { e } else { h }, h, &mut rng);
        }
        glorot(&mut net.dense_w, &mut rng);
        let mut out = Matrix::zeros(1, net.config.out_dim);
        glorot(&mut out, &mut rng);
        net.out_w = out.data().to_vec();
        Ok(net)
    }

    pub fn max_code(&self) -> Code {
        self.config.vocab_size as Code + 1
    }
}

impl ParamSet for NetworkParams {
    fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out = vec![("embedding".to_string(), self.embedding.data())];
        for (l, layer) in self.layers.iter().enumerate() {
            layer.push_tensors(&format!("layer{l}"), &mut out);
        }
        out.push(("dense_w".into(), self.dense_w.data()));
        out.push(("dense_b".into(), &self.dense_b));
        out.push(("out_w".into(), &self.out_w));
        out.push(("out_b".into(), &self.out_b));
        out
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = vec![("embedding".to_string(), self.embedding.data_mut())];
        for (l, layer) in self.layers.iter_mut().enumerate() {
            layer.push_tensors_mut(&format!("layer{l}"), &mut out);
        }
        out.push(("dense_w".into(), self.dense_w.data_mut()));
        out.push(("dense_b".into(), self.dense_b.as_mut_slice()));
        out.push(("out_w".into(), self.out_w.as_mut_slice()));
        out.push(("out_b".into(), self.out_b.as_mut_slice()));
        out
    }

    fn zeros_like(&self) -> Self {
        NetworkParams::zeros(self.config.clone()).expect("config already validated")
    }
}

/// Training mode draws dropout masks from the supplied generator.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut Rng),
}

/// Cached activations of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub codes: Vec<Code>,
    pub layer_states: Vec<Vec<LstmStepState>>,
    /// Per layer, per step inverted-dropout mask (`None` when inactive).
    pub masks: Vec<Option<Vec<Vec<f64>>>>,
    /// Input of the dense layer: the top layer's last output after dropout.
    pub last: Vec<f64>,
    pub dense_pre: Vec<f64>,
    pub dense_out: Vec<f64>,
    pub logit: f64,
    pub p: f64,
}

/// Embeds `codes`, runs the LSTM stack and the dense head, and returns the
/// probability of the malicious class together with the cache for backward.
pub fn network_forward(
    net: &NetworkParams,
    codes: &[Code],
    mode: Mode<'_>,
) -> Result<ForwardCache> {
    if codes.is_empty() {
        return Err(Error::invalid("empty op-code sequence"));
    }
    let max = net.max_code();
    if let Some(&bad) = codes.iter().find(|&&c| c > max) {
        return Err(Error::invalid(format!("op-code index {bad} exceeds {max}")));
    }
    let mut rng = match mode {
        Mode::Train(rng) if net.config.dropout > 0.0 => Some(rng),
        _ => None,
    };

    // PAD always embeds to the zero vector, whatever the stored row holds
    let width = net.config.embedding_size;
    let mut inputs: Vec<Vec<f64>> = codes
        .iter()
        .map(|&c| match c {
            PAD => vec![0.0; width],
            _ => net.embedding.row(c as usize).to_vec(),
        })
        .collect();
    let mut layer_states = Vec::with_capacity(net.layers.len());
    let mut masks = Vec::with_capacity(net.layers.len());
    for layer in &net.layers {
        let states = lstm_layer_forward(layer, &inputs, net.config.act_fn)?;
        let hidden = layer.hidden_size();
        let mask = match rng.as_deref_mut() {
            Some(r) => Some(
                (0..states.len())
                    .map(|_| dropout_mask(hidden, net.config.dropout, r))
                    .collect::<Result<Vec<_>>>()?,
            ),
            None => None,
        };
        inputs = match &mask {
            Some(m) => states
                .iter()
                .zip(m)
                .map(|(s, mk)| s.h_t.iter().zip(mk).map(|(h, k)| h * k).collect())
                .collect(),
            None => states.iter().map(|s| s.h_t.clone()).collect(),
        };
        layer_states.push(states);
        masks.push(mask);
    }

    let last = inputs.pop().expect("non-empty sequence");
    let mut dense_pre = net.dense_b.clone();
    net.dense_w.matvec_acc(&last, &mut dense_pre);
    let dense_out: Vec<f64> = dense_pre
        .iter()
        .map(|&x| DENSE_ACTIVATION.apply(x))
        .collect();
    let logit = dot(&net.out_w, &dense_out) + net.out_b[0];
    if !logit.is_finite() {
        return Err(Error::NonFinite("output logit".into()));
    }
    Ok(ForwardCache {
        codes: codes.to_vec(),
        layer_states,
        masks,
        last,
        dense_pre,
        dense_out,
        logit,
        p: crate::nn::activation::sigmoid(logit),
    })
}

/// Evaluation-mode probability of the malicious class.
pub fn predict(net: &NetworkParams, codes: &[Code]) -> Result<f64> {
    Ok(network_forward(net, codes, Mode::Eval)?.p)
}

/// Gradients of the BCE loss for label `y`, accumulated into `grads`.
/// Returns the loss. The PAD embedding row never receives gradient.
pub fn network_backward(
    net: &NetworkParams,
    cache: &ForwardCache,
    y: Label,
    grads: &mut NetworkParams,
) -> Result<f64> {
    let (_, loss, d_logit) = bce_with_logit(cache.logit, y.as_f64())?;

    for (g, d) in grads.out_w.iter_mut().zip(&cache.dense_out) {
        *g += d_logit * d;
    }
    grads.out_b[0] += d_logit;
    let d_pre: Vec<f64> = net
        .out_w
        .iter()
        .zip(&cache.dense_pre)
        .map(|(w, &z)| d_logit * w * DENSE_ACTIVATION.derivative(z))
        .collect();
    grads.dense_w.outer_acc(&d_pre, &cache.last);
    for (g, d) in grads.dense_b.iter_mut().zip(&d_pre) {
        *g += d;
    }
    let mut d_last = vec![0.0; cache.last.len()];
    net.dense_w.matvec_t_acc(&d_pre, &mut d_last);

    let steps = cache.codes.len();
    let top = net.layers.len() - 1;
    let mut d_out: Vec<Vec<f64>> = vec![vec![0.0; net.config.hidden_size]; steps];
    d_out[steps - 1] = d_last;
    for l in (0..=top).rev() {
        if let Some(masks) = &cache.masks[l] {
            for (d, m) in d_out.iter_mut().zip(masks) {
                d.iter_mut().zip(m).for_each(|(a, k)| *a *= k);
            }
        }
        d_out = lstm_layer_backward(
            &net.layers[l],
            &cache.layer_states[l],
            &d_out,
            net.config.act_fn,
            &mut grads.layers[l],
        );
    }

    for (&c, d) in cache.codes.iter().zip(&d_out) {
        if c == PAD {
            continue;
        }
        for (g, v) in grads.embedding.row_mut(c as usize).iter_mut().zip(d) {
            *g += v;
        }
    }
    Ok(loss)
}

/// Evaluation-mode BCE of one example.
pub fn example_loss(net: &NetworkParams, codes: &[Code], y: Label) -> Result<f64> {
    let cache = network_forward(net, codes, Mode::Eval)?;
    Ok(bce_with_logit(cache.logit, y.as_f64())?.1)
}

fn config_pairs(c: &NetworkConfig) -> Vec<(&'static str, String)> {
    vec![
        ("vocab_size", c.vocab_size.to_string()),
        ("embedding_size", c.embedding_size.to_string()),
        ("hidden_size", c.hidden_size.to_string()),
        ("num_layers", c.num_layers.to_string()),
        ("out_dim", c.out_dim.to_string()),
        ("act_fn", c.act_fn.to_string()),
        ("dropout", format!("{:?}", c.dropout)),
    ]
}

pub fn checkpoint_text(net: &NetworkParams) -> String {
    write_checkpoint(
        CHECKPOINT_HEADER,
        &config_pairs(&net.config),
        &net.tensors(),
    )
}

pub fn parse_checkpoint(text: &str) -> Result<NetworkParams> {
    let raw = read_checkpoint(text, CHECKPOINT_HEADER)?;
    let config = NetworkConfig {
        vocab_size: raw.config_parse("vocab_size")?,
        embedding_size: raw.config_parse("embedding_size")?,
        hidden_size: raw.config_parse("hidden_size")?,
        num_layers: raw.config_parse("num_layers")?,
        out_dim: raw.config_parse("out_dim")?,
        act_fn: raw.config_value("act_fn")?.parse()?,
        dropout: raw.config_parse("dropout")?,
    };
    config.validate()?;
    // refuse absurd shapes before allocating
    let stored: usize = raw.arrays.iter().map(|(_, a)| a.len()).sum();
    if config.checked_param_count() != Some(stored) {
        return Err(Error::invalid(
            "checkpoint arrays do not match the configured shape",
        ));
    }
    let mut net = NetworkParams::zeros(config)?;
    raw.fill(net.tensors_mut())?;
    Ok(net)
}

pub fn save_checkpoint(net: &NetworkParams, path: &Path) -> Result<()> {
    fsutil::write_atomic(path, checkpoint_text(net))
}

pub fn load_checkpoint(path: &Path) -> Result<NetworkParams> {
    parse_checkpoint(&fsutil::read_to_string(path)?)
}
