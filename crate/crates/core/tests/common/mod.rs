#![allow(dead_code)]

//! Independent reference implementations used as test oracles.

use opseqids::corpus::{Code, Label};
use opseqids::lstm::NetworkParams;
use opseqids::nn::{ActivationKind, Matrix};
use twofloat::TwoFloat;

/// Double-double scalar used by the reference forward pass. Only the
/// add, subtract and multiply of `TwoFloat` are relied on; reciprocal and
/// transcendental functions are computed here to full precision.
#[derive(Clone, Copy, Debug)]
pub struct Big(TwoFloat);

pub fn big(x: f64) -> Big {
    Big(TwoFloat::from(x))
}

impl Big {
    pub fn add(&self, o: &Big) -> Big {
        Big(self.0 + o.0)
    }
    pub fn sub(&self, o: &Big) -> Big {
        Big(self.0 - o.0)
    }
    pub fn mul(&self, o: &Big) -> Big {
        Big(self.0 * o.0)
    }
    pub fn mulf(&self, x: f64) -> Big {
        Big(self.0 * x)
    }
    pub fn neg(&self) -> Big {
        Big(-self.0)
    }
    /// One Newton step from the f64 reciprocal.
    pub fn recip(&self) -> Big {
        let r0 = TwoFloat::from(1.0 / self.0.hi());
        Big(r0 + r0 * (TwoFloat::from(1.0) - self.0 * r0))
    }
    /// Range reduction by ln 2 and 2^10, Taylor series, repeated squaring.
    pub fn exp(&self) -> Big {
        let k = (self.0.hi() / std::f64::consts::LN_2).round();
        let r = (self.0 - twofloat::consts::LN_2 * k) * (1.0 / 1024.0);
        let mut term = TwoFloat::from(1.0);
        let mut sum = TwoFloat::from(1.0);
        for n in 1..=20 {
            term = term * r * big(n as f64).recip().0;
            sum += term;
        }
        for _ in 0..10 {
            sum = sum * sum;
        }
        Big(sum * 2f64.powi(k as i32))
    }
    /// Two Newton steps on `exp`.
    pub fn ln(&self) -> Big {
        let mut x = big(self.0.hi().ln());
        for _ in 0..2 {
            x = x.add(&self.mul(&x.neg().exp())).sub(&big(1.0));
        }
        x
    }
    pub fn tanh(&self) -> Big {
        big(1.0).sub(&big(2.0).mul(&self.mulf(2.0).exp().add(&big(1.0)).recip()))
    }
    pub fn gt(&self, x: f64) -> bool {
        self.0 > TwoFloat::from(x)
    }
    pub fn lt(&self, x: f64) -> bool {
        self.0 < TwoFloat::from(x)
    }
    pub fn to_f64(&self) -> f64 {
        self.0.hi() + self.0.lo()
    }
}

fn hard_sigmoid(x: &Big) -> Big {
    let v = x.mulf(0.2).add(&big(0.5));
    if v.lt(0.0) {
        big(0.0)
    } else if v.gt(1.0) {
        big(1.0)
    } else {
        v
    }
}

fn act(kind: ActivationKind, x: &Big) -> Big {
    match kind {
        ActivationKind::Sigmoid => x.neg().exp().add(&big(1.0)).recip(),
        ActivationKind::Tanh => x.tanh(),
        ActivationKind::HardSigmoid => hard_sigmoid(x),
        ActivationKind::Identity => *x,
        ActivationKind::Relu => {
            if x.gt(0.0) {
                *x
            } else {
                big(0.0)
            }
        }
    }
}

fn matvec(m: &Matrix, x: &[Big]) -> Vec<Big> {
    (0..m.rows())
        .map(|r| {
            m.row(r)
                .iter()
                .zip(x)
                .fold(big(0.0), |acc, (&w, v)| acc.add(&v.mulf(w)))
        })
        .collect()
}

/// Binary cross-entropy from a logit.
pub fn bce_from_logit(logit: &Big, y: Label) -> Big {
    // -ln(sigmoid(z)) = ln(1 + e^-z) for y = 1, ln(1 + e^z) for y = 0
    let z = match y {
        Label::Malicious => logit.neg(),
        Label::Benign => *logit,
    };
    if z.gt(0.0) {
        z.add(&z.neg().exp().add(&big(1.0)).ln())
    } else {
        z.exp().add(&big(1.0)).ln()
    }
}

/// High-precision forward pass of the whole network. `masks[l][t]` optionally
/// scales layer `l`'s output at step `t`.
pub fn reference_logit(
    net: &NetworkParams,
    codes: &[Code],
    masks: Option<&[Vec<Vec<f64>>]>,
) -> Big {
    let e = net.config.embedding_size;
    let mut seq: Vec<Vec<Big>> = codes
        .iter()
        .map(|&c| {
            if c == 0 {
                vec![big(0.0); e]
            } else {
                net.embedding
                    .row(c as usize)
                    .iter()
                    .map(|&v| big(v))
                    .collect()
            }
        })
        .collect();
    for (l, layer) in net.layers.iter().enumerate() {
        let h = layer.hidden_size();
        let mut hp = vec![big(0.0); h];
        let mut cp = vec![big(0.0); h];
        let mut out = Vec::with_capacity(seq.len());
        for (step, x) in seq.iter().enumerate() {
            let z: Vec<Vec<Big>> = (0..4)
                .map(|g| {
                    let a = matvec(&layer.w[g], x);
                    let b = matvec(&layer.u[g], &hp);
                    (0..h)
                        .map(|k| a[k].add(&b[k]).add(&big(layer.b[g][k])))
                        .collect()
                })
                .collect();
            let mut hn = Vec::with_capacity(h);
            for k in 0..h {
                let f = hard_sigmoid(&z[0][k]);
                let i = hard_sigmoid(&z[1][k]);
                let o = hard_sigmoid(&z[2][k]);
                let g = act(net.config.act_fn, &z[3][k]);
                cp[k] = f.mul(&cp[k]).add(&i.mul(&g));
                hn.push(o.mul(&cp[k]));
            }
            hp = hn.clone();
            if let Some(m) = masks {
                for (k, v) in hn.iter_mut().enumerate() {
                    *v = v.mulf(m[l][step][k]);
                }
            }
            out.push(hn);
        }
        seq = out;
    }
    let last = seq.pop().unwrap();
    let dense: Vec<Big> = matvec(&net.dense_w, &last)
        .into_iter()
        .zip(&net.dense_b)
        .map(|(v, &b)| v.add(&big(b)).tanh())
        .collect();
    dense
        .iter()
        .zip(&net.out_w)
        .fold(big(net.out_b[0]), |acc, (d, &w)| acc.add(&d.mulf(w)))
}

/// Loss of one example in high precision, shifted by the loss at `base` so
/// the f64 result keeps the small differences central differencing needs.
pub fn shifted_loss<'a>(
    base: &NetworkParams,
    codes: &'a [Code],
    y: Label,
    masks: Option<&'a [Vec<Vec<f64>>]>,
) -> impl FnMut(&NetworkParams) -> opseqids::Result<f64> + 'a {
    let l0 = bce_from_logit(&reference_logit(base, codes, masks), y);
    move |p| {
        Ok(bce_from_logit(&reference_logit(p, codes, masks), y)
            .sub(&l0)
            .to_f64())
    }
}
