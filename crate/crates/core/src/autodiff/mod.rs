//! Minimal reverse-mode differentiation for the Wave-U-Net and its losses,
//! plus the Adam optimizer and a binary parameter store.

pub mod adam;
pub mod check;
pub mod io;
mod scalar;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState, DEFAULT_LEARNING_RATE};
pub use scalar::Scalar;
pub use tape::{Gradients, Tape, Var, MAGNITUDE_GUARD};
pub use tensor::Tensor;

use rand::Rng;

/// Uniform Glorot initialisation: `U(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<T: Scalar, R: Rng>(
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) -> Tensor<T> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| T::lit(rng.random_range(-bound..bound)))
        .collect();
    Tensor::new(shape.to_vec(), data).expect("length matches shape")
}
