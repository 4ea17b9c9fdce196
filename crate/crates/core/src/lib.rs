//! Dialogue coherence ranking with an auxiliary dialogue-act prediction task.
//!
//! The crate is organized bottom-up:
//!
//! - [`nn`] — a small reverse-mode autodiff engine (tape of vector ops with a
//!   fused LSTM step), Adam, and seeded randomness. Generic over the scalar
//!   type; everything above it runs on [`Real`].
//! - [`text`] — tokenization, vocabulary construction, pretrained-embedding
//!   loading, padding/masking.
//! - [`corpus`] — DailyDialog-style parsing, splits, and the canonical
//!   line-delimited corpus format.
//! - [`perturb`] — the four perturbation generators (UO, UI, UR, EUO) and the
//!   pair-dataset builder.
//! - [`model`] — the shared utterance encoder, the dialogue coherence scorer,
//!   and the dialogue-act head.
//! - [`train`] — losses, the multi-task training loop, and checkpoints.
//! - [`metrics`] — Random and CoSim baselines, pairwise accuracy, macro-F1.

pub mod corpus;
pub mod error;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod perturb;
pub mod text;
pub mod train;

pub use error::{Error, Result};

/// Scalar type used by the model, training, and evaluation code.
///
/// The `nn` layer is generic over [`nn::Scalar`]; 64-bit floats are the
/// concrete choice here because desk-scale training is cheap and the
/// finite-difference gradient checks need the precision.
pub type Real = f64;

/// Tensor of [`Real`] values.
pub type Tensor = nn::Tensor<Real>;

/// Autodiff tape over [`Real`] values.
pub type Tape<'p> = nn::Tape<'p, Real>;

/// Parameter store over [`Real`] values.
pub type ParamStore = nn::ParamStore<Real>;

/// Gradient store over [`Real`] values.
pub type GradStore = nn::GradStore<Real>;

/// Adam optimizer state over [`Real`] values.
pub type AdamState = nn::AdamState<Real>;
