//! Frequency-vector multilayer perceptron baseline: ReLU hidden layers and a
//! sigmoid output over op-code relative frequencies.

use std::path::Path;

use crate::checkpoint::{read_checkpoint, write_checkpoint};
use crate::corpus::{Code, Label, PAD};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::lstm::cell::glorot;
use crate::nn::{bce_with_logit, dot, seeded, sigmoid, ActivationKind, Matrix, ParamSet, Rng};
use crate::train::Classifier;

pub const CHECKPOINT_HEADER: &str = "OPSEQIDS-MLP v1";
pub const HIDDEN_ACTIVATION: ActivationKind = ActivationKind::Relu;
pub const DEFAULT_HIDDEN: [usize; 2] = [64, 64];

/// Relative frequency of every op-code index `1..=vocab_size + 1` (UNK
/// included, PAD excluded). Entry `i` holds the share of code `i + 1`.
pub fn frequency_vector(codes: &[Code], vocab_size: usize) -> Result<Vec<f64>> {
    if codes.is_empty() {
        return Err(Error::invalid("frequency vector of an empty sequence"));
    }
    let mut counts = vec![0usize; vocab_size + 1];
    for &c in codes {
        if c == PAD || c as usize > vocab_size + 1 {
            return Err(Error::invalid(format!(
                "op-code index {c} outside 1..={}",
                vocab_size + 1
            )));
        }
        counts[c as usize - 1] += 1;
    }
    let n = codes.len() as f64;
    Ok(counts.into_iter().map(|k| k as f64 / n).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    pub input_size: usize,
    pub hidden: Vec<usize>,
}

impl MlpConfig {
    /// Baseline shape for a vocabulary of `vocab_size` mnemonics.
    pub fn for_vocab(vocab_size: usize) -> Self {
        MlpConfig {
            input_size: vocab_size + 1,
            hidden: DEFAULT_HIDDEN.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0 || self.hidden.contains(&0) {
            return Err(Error::invalid(format!("degenerate MLP shape {self:?}")));
        }
        Ok(())
    }

    fn checked_param_count(&self) -> Option<usize> {
        let mut total = 0usize;
        let mut width = self.input_size;
        for &h in self.hidden.iter().chain(std::iter::once(&1)) {
            total = total.checked_add(h.checked_mul(width)?.checked_add(h)?)?;
            width = h;
        }
        Some(total)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub config: MlpConfig,
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
    pub out_w: Vec<f64>,
    pub out_b: Vec<f64>,
}

impl MlpParams {
    pub fn zeros(config: MlpConfig) -> Result<Self> {
        config.validate()?;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        let mut width = config.input_size;
        for &h in &config.hidden {
            weights.push(Matrix::zeros(h, width));
            biases.push(vec![0.0; h]);
            width = h;
        }
        Ok(MlpParams {
            out_w: vec![0.0; width],
            out_b: vec![0.0],
            weights,
            biases,
            config,
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(config: MlpConfig, seed: u64) -> Result<Self> {
        let mut p = MlpParams::zeros(config)?;
        let mut rng = seeded(seed);
        for w in &mut p.weights {
            glorot(w, &mut rng);
        }
        let mut out = Matrix::zeros(1, p.out_w.len());
        glorot(&mut out, &mut rng);
        p.out_w = out.data().to_vec();
        Ok(p)
    }
}

impl ParamSet for MlpParams {
    fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            out.push((format!("hidden{l}_w"), w.data()));
            out.push((format!("hidden{l}_b"), b.as_slice()));
        }
        out.push(("out_w".into(), &self.out_w));
        out.push(("out_b".into(), &self.out_b));
        out
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = Vec::new();
        for (l, (w, b)) in self
            .weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .enumerate()
        {
            out.push((format!("hidden{l}_w"), w.data_mut()));
            out.push((format!("hidden{l}_b"), b.as_mut_slice()));
        }
        out.push(("out_w".into(), self.out_w.as_mut_slice()));
        out.push(("out_b".into(), self.out_b.as_mut_slice()));
        out
    }

    fn zeros_like(&self) -> Self {
        MlpParams::zeros(self.config.clone()).expect("config already validated")
    }
}

/// Pre-activations and activations of every hidden layer.
#[derive(Debug, Clone)]
pub struct MlpCache {
    pub input: Vec<f64>,
    pub pre: Vec<Vec<f64>>,
    pub act: Vec<Vec<f64>>,
    pub logit: f64,
    pub p: f64,
}

pub fn mlp_forward(params: &MlpParams, x: &[f64]) -> Result<MlpCache> {
    if x.len() != params.config.input_size {
        return Err(Error::shape("x", params.config.input_size, x.len()));
    }
    let mut pre = Vec::new();
    let mut act = Vec::new();
    let mut input = x.to_vec();
    for (w, b) in params.weights.iter().zip(&params.biases) {
        let mut z = b.clone();
        w.matvec_acc(&input, &mut z);
        input = z.iter().map(|&v| HIDDEN_ACTIVATION.apply(v)).collect();
        pre.push(z);
        act.push(input.clone());
    }
    let logit = dot(&params.out_w, &input) + params.out_b[0];
    if !logit.is_finite() {
        return Err(Error::NonFinite("output logit".into()));
    }
    Ok(MlpCache {
        input: x.to_vec(),
        pre,
        act,
        logit,
        p: sigmoid(logit),
    })
}

/// BCE gradients for label `y`, accumulated into `grads`. Returns the loss.
pub fn mlp_backward(
    params: &MlpParams,
    cache: &MlpCache,
    y: Label,
    grads: &mut MlpParams,
) -> Result<f64> {
    let (_, loss, d_logit) = bce_with_logit(cache.logit, y.as_f64())?;
    let top = cache.act.last().unwrap_or(&cache.input);
    for (g, a) in grads.out_w.iter_mut().zip(top) {
        *g += d_logit * a;
    }
    grads.out_b[0] += d_logit;
    let mut d_act: Vec<f64> = params.out_w.iter().map(|w| d_logit * w).collect();
    for l in (0..params.weights.len()).rev() {
        let d_pre: Vec<f64> = d_act
            .iter()
            .zip(&cache.pre[l])
            .map(|(d, &z)| d * HIDDEN_ACTIVATION.derivative(z))
            .collect();
        let below = if l == 0 {
            &cache.input
        } else {
            &cache.act[l - 1]
        };
        grads.weights[l].outer_acc(&d_pre, below);
        for (g, d) in grads.biases[l].iter_mut().zip(&d_pre) {
            *g += d;
        }
        let mut next = vec![0.0; below.len()];
        params.weights[l].matvec_t_acc(&d_pre, &mut next);
        d_act = next;
    }
    Ok(loss)
}

pub fn mlp_predict(params: &MlpParams, x: &[f64]) -> Result<f64> {
    Ok(mlp_forward(params, x)?.p)
}

pub fn mlp_example_loss(params: &MlpParams, x: &[f64], y: Label) -> Result<f64> {
    Ok(bce_with_logit(mlp_forward(params, x)?.logit, y.as_f64())?.1)
}

impl Classifier for MlpParams {
    type Input = Vec<f64>;

    fn loss_and_grad(
        &self,
        x: &Vec<f64>,
        y: Label,
        _rng: Option<&mut Rng>,
        grads: &mut Self,
    ) -> Result<f64> {
        let cache = mlp_forward(self, x)?;
        mlp_backward(self, &cache, y, grads)
    }

    fn probability(&self, x: &Vec<f64>) -> Result<f64> {
        mlp_predict(self, x)
    }
}

pub fn checkpoint_text(params: &MlpParams) -> String {
    let hidden: Vec<String> = params.config.hidden.iter().map(|h| h.to_string()).collect();
    let config = [
        ("input_size", params.config.input_size.to_string()),
        ("hidden", hidden.join(",")),
    ];
    write_checkpoint(CHECKPOINT_HEADER, &config, &params.tensors())
}

pub fn parse_checkpoint(text: &str) -> Result<MlpParams> {
    let raw = read_checkpoint(text, CHECKPOINT_HEADER)?;
    let hidden = raw
        .config_value("hidden")?
        .split(',')
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| Error::parse("mlp checkpoint", 0, format!("hidden width {s:?}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let config = MlpConfig {
        input_size: raw.config_parse("input_size")?,
        hidden,
    };
    config.validate()?;
    let stored: usize = raw.arrays.iter().map(|(_, a)| a.len()).sum();
    if config.checked_param_count() != Some(stored) {
        return Err(Error::invalid(
            "checkpoint arrays do not match the configured shape",
        ));
    }
    let mut p = MlpParams::zeros(config)?;
    raw.fill(p.tensors_mut())?;
    Ok(p)
}

pub fn save_checkpoint(params: &MlpParams, path: &Path) -> Result<()> {
    fsutil::write_atomic(path, checkpoint_text(params))
}

pub fn load_checkpoint(path: &Path) -> Result<MlpParams> {
    parse_checkpoint(&fsutil::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{grad_check, DEFAULT_DELTA};
    use proptest::prelude::*;
    use rand::Rng as _;

    #[test]
    fn frequency_examples() {
        let v = frequency_vector(&[1, 1, 2], 2).unwrap();
        assert_eq!(v, vec![2.0 / 3.0, 1.0 / 3.0, 0.0]);
        let u = frequency_vector(&[1, 2, 3], 2).unwrap();
        assert!(u.iter().all(|&x| x == 1.0 / 3.0));
        assert!(frequency_vector(&[], 2).is_err());
        assert!(frequency_vector(&[0, 1], 2).is_err());
        assert!(frequency_vector(&[4], 2).is_err());
    }

    proptest! {
        #[test]
        fn frequencies_sum_to_one(codes in proptest::collection::vec(1u32..=11, 1..300)) {
            let v = frequency_vector(&codes, 10).unwrap();
            prop_assert!(v.iter().all(|&x| x >= 0.0));
            prop_assert!((v.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn zero_params_give_one_half() {
        let p = MlpParams::zeros(MlpConfig::for_vocab(5)).unwrap();
        assert_eq!(mlp_predict(&p, &[0.2; 6]).unwrap(), 0.5);
    }

    #[test]
    fn gradient_check_two_hidden_layers() {
        for seed in 0..5 {
            let cfg = MlpConfig {
                input_size: 7,
                hidden: vec![6, 5],
            };
            let mut p = MlpParams::init(cfg, seed).unwrap();
            let mut r = seeded(seed + 10);
            // keep pre-activations off the ReLU kink at exactly zero
            for b in p.biases.iter_mut().flatten() {
                *b = r.gen_range(-0.1..0.1);
            }
            let raw: Vec<f64> = (0..7).map(|_| r.gen_range(0.0..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let x: Vec<f64> = raw.iter().map(|v| v / total).collect();
            let y = if seed % 2 == 0 {
                Label::Malicious
            } else {
                Label::Benign
            };
            let cache = mlp_forward(&p, &x).unwrap();
            let mut g = p.zeros_like();
            mlp_backward(&p, &cache, y, &mut g).unwrap();
            let rep = grad_check(&p, &g, |q| mlp_example_loss(q, &x, y), DEFAULT_DELTA).unwrap();
            assert!(rep.max_rel_error < 1e-4, "seed {seed}: {rep:?}");
        }
    }

    #[test]
    fn shape_errors() {
        let p = MlpParams::zeros(MlpConfig::for_vocab(5)).unwrap();
        assert!(matches!(
            mlp_forward(&p, &[0.0; 5]),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn checkpoint_round_trip_and_version() {
        let p = MlpParams::init(MlpConfig::for_vocab(9), 3).unwrap();
        let text = checkpoint_text(&p);
        let q = parse_checkpoint(&text).unwrap();
        assert_eq!(p, q);
        assert_eq!(checkpoint_text(&q), text);
        let err = parse_checkpoint(&text.replace("MLP v1", "MLP v2")).unwrap_err();
        assert!(err.to_string().contains("v1") && err.to_string().contains("v2"));
        assert!(parse_checkpoint(&crate::lstm::network::checkpoint_text(
            &crate::lstm::NetworkParams::zeros(crate::lstm::NetworkConfig {
                vocab_size: 2,
                embedding_size: 2,
                hidden_size: 2,
                num_layers: 1,
                out_dim: 2,
                act_fn: ActivationKind::Tanh,
                dropout: 0.0,
            })
            .unwrap()
        ))
        .is_err());
    }
}
