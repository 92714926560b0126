use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::tensor::{Real, Tensor};

pub(crate) fn uniform<T: Real>(rng: &mut ChaCha8Rng, shape: &[usize], bound: f64) -> Tensor<T> {
    Tensor::from_fn(shape, |_| T::lit(rng.gen_range(-bound..=bound)))
}

/// Uniform(±1/√fan_in).
pub(crate) fn fan_in<T: Real>(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize) -> Tensor<T> {
    uniform(rng, shape, 1.0 / (fan_in.max(1) as f64).sqrt())
}
