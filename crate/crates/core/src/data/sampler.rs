use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};

/// Categorical distribution `P(i) = w_i / Σ w`.
#[derive(Clone, Debug)]
pub struct Sampler {
    probabilities: Vec<f64>,
    dist: WeightedIndex<f64>,
}

impl Sampler {
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.dist.sample(rng)
    }
}

pub fn build_sampler(weights: &[f64]) -> Result<Sampler> {
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::Invalid(format!("sampling weight {w} is not a finite nonnegative number")));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::Invalid("sampling weights are all zero".into()));
    }
    let dist = WeightedIndex::new(weights.iter().copied())
        .map_err(|e| Error::Invalid(format!("sampling weights: {e}")))?;
    Ok(Sampler {
        probabilities: weights.iter().map(|w| w / total).collect(),
        dist,
    })
}
