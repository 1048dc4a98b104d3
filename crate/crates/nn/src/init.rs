//! Weight initializers.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::Scalar;

/// Zero-mean normal with `std = gain / sqrt(fan_in)` (He initialization for
/// `gain = sqrt(2)`).
pub fn fan_in_normal<T: Scalar, R: Rng + ?Sized>(
    len: usize,
    fan_in: usize,
    gain: f64,
    rng: &mut R,
) -> Vec<T> {
    let std = gain / (fan_in.max(1) as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("finite std");
    (0..len).map(|_| T::lit(normal.sample(rng))).collect()
}

/// He gain for ReLU-family layers with the given negative slope.
pub fn relu_gain(negative_slope: f64) -> f64 {
    (2.0 / (1.0 + negative_slope * negative_slope)).sqrt()
}
