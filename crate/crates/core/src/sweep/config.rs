use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::nn::ActivationKind;
use crate::prep::{resolve_sequence_length, LengthSpec, LengthStats};

pub const ALLOWED_DROPOUT: [f64; 3] = [0.0, 0.3, 0.5];

/// A width given either directly or as a statistic of the length
/// distribution (`256`, `Q(0.75)`, `MEAN`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DimSpec {
    Fixed(usize),
    Length(LengthSpec),
}

impl DimSpec {
    pub fn resolve(&self, stats: &LengthStats) -> usize {
        match *self {
            DimSpec::Fixed(n) => n,
            DimSpec::Length(spec) => resolve_sequence_length(stats, spec),
        }
    }
}

impl fmt::Display for DimSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DimSpec::Fixed(n) => write!(f, "{n}"),
            DimSpec::Length(s) => write!(f, "{s}"),
        }
    }
}

impl FromStr for DimSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.parse::<usize>() {
            Ok(n) => Ok(DimSpec::Fixed(n)),
            Err(_) => Ok(DimSpec::Length(s.parse()?)),
        }
    }
}

/// One row of a hyperparameter grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub id: String,
    pub seq_len: DimSpec,
    pub embedding_size: usize,
    pub num_layers: usize,
    pub out_dim: DimSpec,
    pub act_fn: ActivationKind,
    pub dropout: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub min_epochs: usize,
    pub seed: u64,
    pub lr: f64,
}

impl SweepConfig {
    /// A config with the default seed, epoch window and learning rate.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: &str,
        seq_len: DimSpec,
        embedding_size: usize,
        num_layers: usize,
        out_dim: DimSpec,
        act_fn: ActivationKind,
        dropout: f64,
        batch_size: usize,
    ) -> Self {
        SweepConfig {
            id: id.to_string(),
            seq_len,
            embedding_size,
            num_layers,
            out_dim,
            act_fn,
            dropout,
            batch_size,
            max_epochs: 10,
            min_epochs: 5,
            seed: 42,
            lr: 0.001,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::invalid(format!("{}: {msg}", self.id)));
        if self.id.trim().is_empty() {
            return Err(Error::invalid("config id is empty"));
        }
        for (name, v) in [
            ("EmSz", self.embedding_size),
            ("Lyrs", self.num_layers),
            ("BchSz", self.batch_size),
            ("max_epochs", self.max_epochs),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        for (name, d) in [("SqLn", self.seq_len), ("OutDim", self.out_dim)] {
            if d == DimSpec::Fixed(0) {
                return bad(format!("{name} must be positive"));
            }
        }
        if !ALLOWED_DROPOUT.contains(&self.dropout) {
            return bad(format!(
                "DropOut {} not one of {ALLOWED_DROPOUT:?}",
                self.dropout
            ));
        }
        if !matches!(self.act_fn, ActivationKind::Sigmoid | ActivationKind::Tanh) {
            return bad(format!("ActFun {} is not sigmoid or tanh", self.act_fn));
        }
        if self.min_epochs > self.max_epochs {
            return bad(format!(
                "min_epochs {} exceeds max_epochs {}",
                self.min_epochs, self.max_epochs
            ));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate {}", self.lr));
        }
        Ok(())
    }

    /// The seven grid columns, in table order, as display strings.
    pub fn columns(&self) -> [(&'static str, String); 7] {
        [
            ("SqLn", self.seq_len.to_string()),
            ("EmSz", self.embedding_size.to_string()),
            ("Lyrs", self.num_layers.to_string()),
            ("OutDim", self.out_dim.to_string()),
            ("ActFun", self.act_fn.to_string()),
            ("DropOut", format_float(self.dropout)),
            ("BchSz", self.batch_size.to_string()),
        ]
    }
}

pub(crate) fn format_float(d: f64) -> String {
    format!("{d:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> SweepConfig {
        SweepConfig::new(
            "C-1",
            DimSpec::Length(LengthSpec::Quantile(0.75)),
            8,
            1,
            DimSpec::Fixed(4),
            ActivationKind::Tanh,
            0.3,
            4,
        )
    }

    #[test]
    fn dim_spec_forms() {
        assert_eq!("256".parse::<DimSpec>().unwrap(), DimSpec::Fixed(256));
        assert_eq!(
            "Q(0.75)".parse::<DimSpec>().unwrap(),
            DimSpec::Length(LengthSpec::Quantile(0.75))
        );
        assert_eq!(
            "MEAN".parse::<DimSpec>().unwrap(),
            DimSpec::Length(LengthSpec::Mean)
        );
        assert!("wide".parse::<DimSpec>().is_err());
        for s in ["256", "Q(0.75)", "Q(1.0)", "Q(0.50)", "MEAN"] {
            assert_eq!(s.parse::<DimSpec>().unwrap().to_string(), s);
        }
    }

    #[test]
    fn validation() {
        assert!(base().validate().is_ok());
        let mut c = base();
        c.dropout = 0.2;
        assert!(c.validate().is_err());
        c = base();
        c.act_fn = ActivationKind::Relu;
        assert!(c.validate().is_err());
        c = base();
        c.seq_len = DimSpec::Fixed(0);
        assert!(c.validate().is_err());
        c = base();
        c.min_epochs = 11;
        assert!(c.validate().is_err());
        c = base();
        c.batch_size = 0;
        assert!(c.validate().is_err());
    }
}
