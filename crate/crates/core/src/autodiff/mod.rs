//! Dense-tensor engine with reverse-mode automatic differentiation, named
//! parameter stores with a binary checkpoint format, Adam, and
//! finite-difference gradient verification.

pub mod adam;
pub mod array;
pub mod gradcheck;
pub mod params;
pub mod tape;

pub use adam::{adam_step, AdamState};
pub use array::Array;
pub use gradcheck::{grad_check, grad_check_named};
pub use params::{BoundParams, Params};
pub use tape::{Tape, Tensor};

use rand::Rng;

/// Glorot-uniform weight init: uniform in +-sqrt(6 / (fan_in + fan_out)).
pub fn glorot_uniform<R: Rng>(fan_in: usize, fan_out: usize, rng: &mut R) -> Array {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array::uniform(&[fan_in, fan_out], -bound, bound, rng)
}
