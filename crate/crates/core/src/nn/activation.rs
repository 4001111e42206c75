use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Activation functions used across the LSTM and MLP models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActivationKind {
    Sigmoid,
    Tanh,
    /// `clamp(0.2·x + 0.5, 0, 1)`, the gate (recurrent) activation.
    HardSigmoid,
    Identity,
    Relu,
}

const HARD_SLOPE: f64 = 0.2;
const HARD_EDGE: f64 = 2.5;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl ActivationKind {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            ActivationKind::Sigmoid => sigmoid(x),
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::HardSigmoid => (HARD_SLOPE * x + 0.5).clamp(0.0, 1.0),
            ActivationKind::Identity => x,
            ActivationKind::Relu => x.max(0.0),
        }
    }

    /// Derivative with respect to the pre-activation `x`. Kinks take the
    /// zero subgradient.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            ActivationKind::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            ActivationKind::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            ActivationKind::HardSigmoid => {
                if x > -HARD_EDGE && x < HARD_EDGE {
                    HARD_SLOPE
                } else {
                    0.0
                }
            }
            ActivationKind::Identity => 1.0,
            ActivationKind::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn apply_vec(self, x: &[f64]) -> Result<Vec<f64>> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{self} input")));
        }
        Ok(x.iter().map(|&v| self.apply(v)).collect())
    }

    pub fn derivative_at(self, x: &[f64]) -> Result<Vec<f64>> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{self} input")));
        }
        Ok(x.iter().map(|&v| self.derivative(v)).collect())
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Tanh => "tanh",
            ActivationKind::HardSigmoid => "hard_sigmoid",
            ActivationKind::Identity => "identity",
            ActivationKind::Relu => "relu",
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sigmoid" => Ok(ActivationKind::Sigmoid),
            "tanh" => Ok(ActivationKind::Tanh),
            "hard_sigmoid" | "hard-sigmoid" => Ok(ActivationKind::HardSigmoid),
            "identity" | "linear" => Ok(ActivationKind::Identity),
            "relu" => Ok(ActivationKind::Relu),
            other => Err(Error::invalid(format!("unknown activation `{other}`"))),
        }
    }
}
