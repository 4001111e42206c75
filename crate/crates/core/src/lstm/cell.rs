use rand::Rng as _;

use crate::error::{Error, Result};
use crate::nn::activation::ActivationKind;
use crate::nn::matrix::{affine, check_finite, Matrix};
use crate::nn::rng::Rng;

/// Gate activation (σ_g).
pub const GATE_ACTIVATION: ActivationKind = ActivationKind::HardSigmoid;
/// Activation applied to the cell state before the output gate (σ_h).
pub const STATE_ACTIVATION: ActivationKind = ActivationKind::Identity;

pub const FORGET: usize = 0;
pub const INPUT: usize = 1;
pub const OUTPUT: usize = 2;
pub const CELL: usize = 3;
pub const GATE_NAMES: [&str; 4] = ["f", "i", "o", "c"];

/// Weights of one LSTM layer, indexed by [`FORGET`], [`INPUT`], [`OUTPUT`]
/// and [`CELL`].
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayerParams {
    /// Input weights, `hidden × input`.
    pub w: [Matrix; 4],
    /// Recurrent weights, `hidden × hidden`.
    pub u: [Matrix; 4],
    pub b: [Vec<f64>; 4],
}

impl LstmLayerParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmLayerParams {
            w: std::array::from_fn(|_| Matrix::zeros(hidden, input)),
            u: std::array::from_fn(|_| Matrix::zeros(hidden, hidden)),
            b: std::array::from_fn(|_| vec![0.0; hidden]),
        }
    }

    /// Glorot-uniform weights, zero biases except a forget bias of one.
    pub fn init(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        let mut p = LstmLayerParams::zeros(input, hidden);
        for m in p.w.iter_mut().chain(p.u.iter_mut()) {
            glorot(m, rng);
        }
        p.b[FORGET].fill(1.0);
        p
    }

    pub fn input_size(&self) -> usize {
        self.w[0].cols()
    }

    pub fn hidden_size(&self) -> usize {
        self.b[0].len()
    }

    pub fn param_count(input: usize, hidden: usize) -> usize {
        4 * (hidden * input + hidden * hidden + hidden)
    }

    pub(crate) fn push_tensors<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a [f64])>) {
        for g in 0..4 {
            out.push((format!("{prefix}.w_{}", GATE_NAMES[g]), self.w[g].data()));
        }
        for g in 0..4 {
            out.push((format!("{prefix}.u_{}", GATE_NAMES[g]), self.u[g].data()));
        }
        for g in 0..4 {
            out.push((format!("{prefix}.b_{}", GATE_NAMES[g]), &self.b[g]));
        }
    }

    pub(crate) fn push_tensors_mut<'a>(
        &'a mut self,
        prefix: &str,
        out: &mut Vec<(String, &'a mut [f64])>,
    ) {
        for (g, m) in self.w.iter_mut().enumerate() {
            out.push((format!("{prefix}.w_{}", GATE_NAMES[g]), m.data_mut()));
        }
        for (g, m) in self.u.iter_mut().enumerate() {
            out.push((format!("{prefix}.u_{}", GATE_NAMES[g]), m.data_mut()));
        }
        for (g, b) in self.b.iter_mut().enumerate() {
            out.push((format!("{prefix}.b_{}", GATE_NAMES[g]), b.as_mut_slice()));
        }
    }
}

/// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot(m: &mut Matrix, rng: &mut Rng) {
    let fan = (m.rows() + m.cols()) as f64;
    if fan == 0.0 {
        return;
    }
    let s = (6.0 / fan).sqrt();
    for v in m.data_mut() {
        *v = rng.gen_range(-s..s);
    }
}

/// Everything one cell step computes, kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStepState {
    pub x_t: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Pre-activations of the four gates.
    pub z: [Vec<f64>; 4],
    pub f_t: Vec<f64>,
    pub i_t: Vec<f64>,
    pub o_t: Vec<f64>,
    /// Candidate `σ_c(W_c·x + U_c·h + b_c)`.
    pub g_t: Vec<f64>,
    pub c_t: Vec<f64>,
    pub h_t: Vec<f64>,
}

/// One step of the forget-gate LSTM:
///
/// ```text
/// f = σ_g(W_f·x + U_f·h + b_f)
/// i = σ_g(W_i·x + U_i·h + b_i)
/// o = σ_g(W_o·x + U_o·h + b_o)
/// c = f∘c_prev + i∘σ_c(W_c·x + U_c·h + b_c)
/// h = o∘σ_h(c)
/// ```
///
/// with σ_g the hard sigmoid, σ_c = `act_fn` and σ_h the identity.
pub fn lstm_cell_forward(
    params: &LstmLayerParams,
    x_t: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    act_fn: ActivationKind,
) -> Result<LstmStepState> {
    let hidden = params.hidden_size();
    if c_prev.len() != hidden {
        return Err(Error::shape("c_prev", hidden, c_prev.len()));
    }
    let mut z: [Vec<f64>; 4] = Default::default();
    for g in 0..4 {
        z[g] =
            affine(&params.w[g], x_t, &params.u[g], h_prev, &params.b[g]).map_err(|e| match e {
                Error::Shape {
                    operand,
                    expected,
                    got,
                } => Error::Shape {
                    operand: format!("{operand}_{}", GATE_NAMES[g]),
                    expected,
                    got,
                },
                other => other,
            })?;
    }
    let gate = |v: &[f64]| {
        v.iter()
            .map(|&x| GATE_ACTIVATION.apply(x))
            .collect::<Vec<_>>()
    };
    let f_t = gate(&z[FORGET]);
    let i_t = gate(&z[INPUT]);
    let o_t = gate(&z[OUTPUT]);
    let g_t: Vec<f64> = z[CELL].iter().map(|&x| act_fn.apply(x)).collect();
    let c_t: Vec<f64> = (0..hidden)
        .map(|k| f_t[k] * c_prev[k] + i_t[k] * g_t[k])
        .collect();
    let h_t: Vec<f64> = (0..hidden)
        .map(|k| o_t[k] * STATE_ACTIVATION.apply(c_t[k]))
        .collect();
    check_finite("cell state", &c_t)?;
    check_finite("hidden state", &h_t)?;
    Ok(LstmStepState {
        x_t: x_t.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        z,
        f_t,
        i_t,
        o_t,
        g_t,
        c_t,
        h_t,
    })
}

/// Runs the cell over a sequence from zero initial state.
pub fn lstm_layer_forward(
    params: &LstmLayerParams,
    inputs: &[Vec<f64>],
    act_fn: ActivationKind,
) -> Result<Vec<LstmStepState>> {
    if inputs.is_empty() {
        return Err(Error::invalid("LSTM layer needs at least one time step"));
    }
    let hidden = params.hidden_size();
    let mut states: Vec<LstmStepState> = Vec::with_capacity(inputs.len());
    let zeros = vec![0.0; hidden];
    for x in inputs {
        let (h, c) = match states.last() {
            Some(s) => (&s.h_t, &s.c_t),
            None => (&zeros, &zeros),
        };
        let s = lstm_cell_forward(params, x, h, c, act_fn)?;
        states.push(s);
    }
    Ok(states)
}

/// Backpropagation through time for one layer.
///
/// `d_h` holds the loss gradient arriving at each step's `h_t` from above.
/// Parameter gradients accumulate into `grads`; the return value is the
/// gradient with respect to each step's input.
pub fn lstm_layer_backward(
    params: &LstmLayerParams,
    states: &[LstmStepState],
    d_h: &[Vec<f64>],
    act_fn: ActivationKind,
    grads: &mut LstmLayerParams,
) -> Vec<Vec<f64>> {
    let hidden = params.hidden_size();
    let input = params.input_size();
    let mut d_x = vec![vec![0.0; input]; states.len()];
    let mut dh_next = vec![0.0; hidden];
    let mut dc_next = vec![0.0; hidden];
    let mut dz: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; hidden]);

    for t in (0..states.len()).rev() {
        let s = &states[t];
        for k in 0..hidden {
            let dh = d_h[t][k] + dh_next[k];
            let sc = STATE_ACTIVATION.apply(s.c_t[k]);
            let d_o = dh * sc;
            let dc = dc_next[k] + dh * s.o_t[k] * STATE_ACTIVATION.derivative(s.c_t[k]);
            let d_f = dc * s.c_prev[k];
            let d_i = dc * s.g_t[k];
            let d_g = dc * s.i_t[k];
            dc_next[k] = dc * s.f_t[k];
            dz[FORGET][k] = d_f * GATE_ACTIVATION.derivative(s.z[FORGET][k]);
            dz[INPUT][k] = d_i * GATE_ACTIVATION.derivative(s.z[INPUT][k]);
            dz[OUTPUT][k] = d_o * GATE_ACTIVATION.derivative(s.z[OUTPUT][k]);
            dz[CELL][k] = d_g * act_fn.derivative(s.z[CELL][k]);
        }
        dh_next.fill(0.0);
        for g in 0..4 {
            grads.w[g].outer_acc(&dz[g], &s.x_t);
            grads.u[g].outer_acc(&dz[g], &s.h_prev);
            for (b, d) in grads.b[g].iter_mut().zip(&dz[g]) {
                *b += d;
            }
            params.w[g].matvec_t_acc(&dz[g], &mut d_x[t]);
            params.u[g].matvec_t_acc(&dz[g], &mut dh_next);
        }
    }
    d_x
}
