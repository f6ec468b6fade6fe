use rand::Rng;
use rand_distr::StandardNormal;

use crate::Scalar;

/// Log of the `Normal(mean, var)` density at `x`.
#[inline]
pub fn log_normal_density<T: Scalar>(x: T, mean: T, var: T) -> T {
    let d = x - mean;
    -(d * d) / (T::of(2.0) * var) - T::of(0.5) * (T::of(2.0) * T::PI() * var).ln()
}

#[inline]
pub fn normal_density<T: Scalar>(x: T, mean: T, var: T) -> T {
    log_normal_density(x, mean, var).exp()
}

#[inline]
pub fn standard_normal<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> T {
    let z: f64 = rng.sample(StandardNormal);
    T::of(z)
}
