use rand::Rng;

use crate::{Error, Result, Scalar};

/// Inverse-CDF sampler over unnormalized nonnegative weights.
///
/// Building the table is O(N); each draw is a binary search.
#[derive(Debug, Clone)]
pub struct Categorical<T> {
    cumulative: Vec<T>,
    last_positive: usize,
}

impl<T: Scalar> Categorical<T> {
    pub fn new(weights: &[T]) -> Result<Self> {
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = T::zero();
        let mut last_positive = None;
        for (index, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < T::zero() {
                return Err(Error::InvalidWeight { index, value: w.as_f64() });
            }
            if w > T::zero() {
                last_positive = Some(index);
            }
            acc = acc + w;
            cumulative.push(acc);
        }
        if !acc.is_finite() {
            return Err(Error::invalid("categorical weights sum to a non-finite value"));
        }
        let last_positive =
            last_positive.ok_or_else(|| Error::invalid("categorical weights are all zero or empty"))?;
        Ok(Categorical { cumulative, last_positive })
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    pub fn total(&self) -> T {
        self.cumulative[self.cumulative.len() - 1]
    }

    pub fn probability(&self, i: usize) -> T {
        let prev = if i == 0 { T::zero() } else { self.cumulative[i - 1] };
        (self.cumulative[i] - prev) / self.total()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let target = T::of(u) * self.total();
        // first index whose cumulative weight strictly exceeds the target;
        // zero-weight entries share their predecessor's value and are skipped
        let i = self.cumulative.partition_point(|&c| c <= target);
        i.min(self.last_positive)
    }
}

/// One draw from `cat(weights)`.
pub fn categorical<T: Scalar, R: Rng + ?Sized>(weights: &[T], rng: &mut R) -> Result<usize> {
    Ok(Categorical::new(weights)?.sample(rng))
}
