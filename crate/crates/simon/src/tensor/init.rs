//! Weight initialization.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{Scalar, Tensor};
use crate::error::{Result, SimonError};

/// Glorot (Xavier) normal init: zero-mean gaussian with
/// std = sqrt(2 / (fan_in + fan_out)).
///
/// Sampling happens in f64 and is narrowed afterwards, so the stream of
/// draws for a given seed is identical across scalar types.
pub fn glorot_normal_init<S: Scalar, R: Rng>(
    shape: Vec<usize>,
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) -> Result<Tensor<S>> {
    if fan_in + fan_out == 0 {
        return Err(SimonError::InvalidParameter(
            "glorot init needs fan_in + fan_out > 0".into(),
        ));
    }
    let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("std is finite and positive");
    let numel: usize = shape.iter().product();
    let data: Vec<S> = (0..numel).map(|_| S::from_f64(normal.sample(rng))).collect();
    Tensor::new(shape, data)
}
