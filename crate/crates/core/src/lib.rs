//! Op-code sequence malware classification: disassembly ingestion, length
//! statistics and cleaning, an embedding + LSTM classifier trained with
//! hand-derived backpropagation through time, a frequency-vector MLP baseline,
//! and a hyperparameter sweep harness.

pub mod checkpoint;
pub mod corpus;
pub mod error;
pub mod fsutil;
pub mod lstm;
pub mod mlp;
pub mod nn;
pub mod prep;
pub mod sweep;
pub mod train;

pub use error::{Error, Result};
