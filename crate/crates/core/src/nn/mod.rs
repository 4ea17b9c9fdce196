//! Reverse-mode autodiff engine with the layers the coherence model needs.
//!
//! The engine records vector-valued operations on a [`Tape`] during the
//! forward pass and replays them in reverse to accumulate gradients.
//! Parameters live outside the tape in a [`ParamStore`]; their gradients are
//! accumulated into a matching [`GradStore`] so a batch can sum contributions
//! from many per-pair tapes before one optimizer step.

mod adam;
pub mod gradcheck;
mod lstm;
mod params;
mod rng;
mod tape;
mod tensor;

pub use adam::AdamState;
pub use lstm::{bilstm, LstmCellParams};
pub use params::{GradStore, ParamId, ParamStore};
pub use rng::SeededRng;
pub use tape::{Backprop, LstmState, Src, Tape, Var};
pub use tensor::Tensor;

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::Float;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Scalar types the engine can run on.
pub trait Scalar:
    Float
    + num_traits::NumAssignOps
    + Sum
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    fn from_f64(v: f64) -> Self {
        num_traits::cast(v).expect("f64 literal representable in scalar type")
    }

    fn to_f64(self) -> f64 {
        num_traits::cast(self).expect("scalar representable as f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Numerically stable softmax of a plain slice (max-subtraction).
pub fn softmax_slice<F: Scalar>(xs: &[F]) -> Vec<F> {
    let max = xs.iter().cloned().fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = xs.iter().map(|&x| (x - max).exp()).collect();
    let sum: F = exps.iter().cloned().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
