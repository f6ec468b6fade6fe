//! ABC-style estimator for models whose emission density is intractable but
//! can be simulated: the observation density is replaced by a smoothing
//! kernel evaluated at a simulated pseudo-observation.

use std::sync::Arc;

use crate::model::TransitionEstimator;
use crate::samplers::{log_normal_density, StreamRng};
use crate::{Error, Result, Scalar};

/// Smoothing kernel `kappa_eps`, applied coordinate-wise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AbcKernel {
    /// Normal with variance `eps^2` per coordinate.
    #[default]
    Gaussian,
    /// Uniform on `[-eps, eps]` per coordinate.
    Uniform,
}

impl AbcKernel {
    fn eval<T: Scalar>(self, bandwidth: T, u: &[T]) -> T {
        match self {
            AbcKernel::Gaussian => {
                let var = bandwidth * bandwidth;
                u.iter().map(|&ui| log_normal_density(ui, T::zero(), var)).sum::<T>().exp()
            }
            AbcKernel::Uniform => {
                if u.iter().all(|ui| ui.abs() <= bandwidth) {
                    (T::of(2.0) * bandwidth).powi(u.len() as i32).recip()
                } else {
                    T::zero()
                }
            }
        }
    }
}

type EmissionFn<T> = Arc<dyn Fn(&[T], &mut StreamRng) -> Vec<T> + Send + Sync>;
type BoundFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

#[derive(Clone)]
pub struct AbcConfig<T> {
    pub bandwidth: T,
    pub kernel: AbcKernel,
    /// Draws a pseudo-observation `z ~ G(x', .)`.
    pub emission_sampler: EmissionFn<T>,
}

impl<T: Scalar> AbcConfig<T> {
    pub fn new(bandwidth: T, emission_sampler: impl Fn(&[T], &mut StreamRng) -> Vec<T> + Send + Sync + 'static) -> Self {
        AbcConfig { bandwidth, kernel: AbcKernel::Gaussian, emission_sampler: Arc::new(emission_sampler) }
    }

    pub fn with_kernel(mut self, kernel: AbcKernel) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > T::zero()) || !self.bandwidth.is_finite() {
            return Err(Error::invalid("ABC bandwidth must be positive and finite"));
        }
        Ok(())
    }
}

/// `l_hat<z>(x, x') = q(x, x') kappa_eps(z - y)` with `z ~ G(x', .)`.
#[derive(Clone)]
pub struct AbcEstimator<T, Q> {
    cfg: AbcConfig<T>,
    transition: Q,
    transition_bound: Option<BoundFn<T>>,
    y_next: Vec<T>,
}

pub fn abc_estimator<T, Q>(cfg: AbcConfig<T>, transition_density: Q, y_next: Vec<T>) -> Result<AbcEstimator<T, Q>>
where
    T: Scalar,
    Q: Fn(&[T], &[T]) -> T + Send + Sync,
{
    cfg.validate()?;
    Ok(AbcEstimator { cfg, transition: transition_density, transition_bound: None, y_next })
}

impl<T: Scalar, Q> AbcEstimator<T, Q> {
    /// Supplies `sup_x q(x, x')`, enabling rejection backward sampling.
    pub fn with_transition_bound(mut self, bound: impl Fn(&[T]) -> T + Send + Sync + 'static) -> Self {
        self.transition_bound = Some(Arc::new(bound));
        self
    }

    pub fn kernel_density(&self, z: &[T]) -> T {
        let u: Vec<T> = z.iter().zip(&self.y_next).map(|(&zi, &yi)| zi - yi).collect();
        self.cfg.kernel.eval(self.cfg.bandwidth, &u)
    }
}

impl<T, Q> TransitionEstimator<T> for AbcEstimator<T, Q>
where
    T: Scalar,
    Q: Fn(&[T], &[T]) -> T + Send + Sync,
{
    type Aux = Vec<T>;

    fn draw_aux(&self, _x: &[T], x_next: &[T], rng: &mut StreamRng) -> Vec<T> {
        (self.cfg.emission_sampler)(x_next, rng)
    }

    fn evaluate(&self, z: &Vec<T>, x: &[T], x_next: &[T]) -> T {
        (self.transition)(x, x_next) * self.kernel_density(z)
    }

    fn bound(&self, x_next: &[T]) -> Option<T> {
        let zero = vec![T::zero(); self.y_next.len()];
        self.transition_bound.as_ref().map(|b| b(x_next) * self.cfg.kernel.eval(self.cfg.bandwidth, &zero))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::{normal_density, standard_normal, RngStream};

    fn emission() -> AbcConfig<f64> {
        AbcConfig::new(0.5, |x: &[f64], rng: &mut StreamRng| vec![x[0] + standard_normal::<f64, _>(rng)])
    }

    fn q(x: &[f64], y: &[f64]) -> f64 {
        normal_density(y[0], 0.8 * x[0], 0.3)
    }

    #[test]
    fn kernel_mode() {
        let e = abc_estimator(emission(), q, vec![1.2]).unwrap();
        let v = e.evaluate(&vec![1.2], &[0.4], &[1.0]);
        assert!((v - q(&[0.4], &[1.0]) * normal_density(0.0, 0.0, 0.25)).abs() < 1e-15);
    }

    #[test]
    fn wide_bandwidth_flattens() {
        let mut cfg = emission();
        cfg.bandwidth = 1e3;
        let e = abc_estimator(cfg, q, vec![0.0]).unwrap();
        let a = e.evaluate(&vec![-1.0], &[0.0], &[0.5]);
        let b = e.evaluate(&vec![0.5], &[0.0], &[0.5]);
        assert!((a / b - 1.0).abs() < 1e-6);
    }

    #[test]
    fn uniform_kernel_support() {
        let cfg = emission().with_kernel(AbcKernel::Uniform);
        let e = abc_estimator(cfg, |_: &[f64], _: &[f64]| 1.0, vec![0.0]).unwrap();
        assert_eq!(e.kernel_density(&[0.4]), 1.0);
        assert_eq!(e.kernel_density(&[0.6]), 0.0);
    }

    #[test]
    fn bound_scales_kernel_peak() {
        let e = abc_estimator(emission(), q, vec![0.0]).unwrap();
        assert!(e.bound(&[0.0]).is_none());
        let e = e.with_transition_bound(|_| 1.0 / (2.0 * std::f64::consts::PI * 0.3).sqrt());
        let c = e.bound(&[0.7]).unwrap();
        let mut rng = RngStream::new(9).rng();
        for _ in 0..1000 {
            let x = [2.0 * standard_normal::<f64, _>(&mut rng)];
            let z = e.draw_aux(&x, &[0.7], &mut rng);
            assert!(e.evaluate(&z, &x, &[0.7]) <= c);
        }
    }

    #[test]
    fn invalid_bandwidth() {
        let mut cfg = emission();
        cfg.bandwidth = 0.0;
        assert!(abc_estimator(cfg, q, vec![0.0]).is_err());
    }

    #[test]
    fn gaussian_convolution_mean() {
        let (x, x_next, y, eps) = ([0.3], [1.1], 1.6, 0.5);
        let e = abc_estimator(emission(), q, vec![y]).unwrap();
        let mut rng = RngStream::new(11).rng();
        let n = 100_000;
        let vals: Vec<f64> = (0..n)
            .map(|_| {
                let z = e.draw_aux(&x, &x_next, &mut rng);
                e.evaluate(&z, &x, &x_next)
            })
            .collect();
        let m = vals.iter().sum::<f64>() / n as f64;
        let sd = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
        let want = q(&x, &x_next) * normal_density(y, x_next[0], 1.0 + eps * eps);
        assert!((m - want).abs() < 3.0 * sd / (n as f64).sqrt(), "{m} vs {want}");
    }
}
