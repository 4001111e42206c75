//! Dense numeric kernel: matrices, activations, loss, optimizer, dropout,
//! seeded randomness and a finite-difference gradient checker.

pub mod activation;
pub mod adam;
pub mod dropout;
pub mod gradcheck;
pub mod loss;
pub mod matrix;
pub mod params;
pub mod rng;

pub use activation::{sigmoid, ActivationKind};
pub use adam::{AdamConfig, AdamState};
pub use dropout::dropout_mask;
pub use gradcheck::{grad_check, GradCheckReport};
pub use loss::{bce_loss, bce_with_logit, mean_bce};
pub use matrix::{affine, dot, hadamard, Matrix};
pub use params::{clip_global_norm, ParamSet};
pub use rng::{derive_seed, seeded, Rng};
