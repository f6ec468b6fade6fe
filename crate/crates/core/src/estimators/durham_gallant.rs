//! Durham–Gallant importance-sampling estimate of a scalar diffusion's
//! transition density over an observation interval `delta`.
//!
//! The interval is split into `K = delta / eps` Euler substeps; the `K - 1`
//! intermediate states are integrated out by importance sampling with a
//! Brownian bridge pinned at both endpoints. The estimator is unbiased for
//! the `K`-fold composition of the Euler density, which converges to the true
//! transition density as `eps -> 0`.

use std::sync::Arc;

use crate::model::TransitionEstimator;
use crate::samplers::{bridge_log_density, bridge_sample, log_normal_density, BridgePath, StreamRng};
use crate::{Error, Result, Scalar};

/// Scalar diffusion `dX = mu(X) dt + sigma(X) dW`.
pub trait Sde<T: Scalar>: Send + Sync {
    fn drift(&self, x: T) -> T;
    fn diffusion(&self, x: T) -> T;
}

/// Ornstein–Uhlenbeck process with `mu(x) = -(x - theta)` and unit diffusion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrnsteinUhlenbeck<T> {
    pub theta: T,
}

impl<T: Scalar> Sde<T> for OrnsteinUhlenbeck<T> {
    fn drift(&self, x: T) -> T {
        self.theta - x
    }

    fn diffusion(&self, _x: T) -> T {
        T::one()
    }
}

/// Closure-backed [`Sde`]; the diffusion coefficient is clamped below at `sigma_floor`.
#[derive(Clone)]
pub struct SdeSpec<T> {
    drift: Arc<dyn Fn(T) -> T + Send + Sync>,
    diffusion: Arc<dyn Fn(T) -> T + Send + Sync>,
    sigma_floor: T,
}

impl<T: Scalar> SdeSpec<T> {
    pub fn new(
        drift: impl Fn(T) -> T + Send + Sync + 'static,
        diffusion: impl Fn(T) -> T + Send + Sync + 'static,
        sigma_floor: T,
    ) -> Result<Self> {
        if !(sigma_floor > T::zero()) {
            return Err(Error::invalid("sigma_floor must be positive"));
        }
        Ok(SdeSpec { drift: Arc::new(drift), diffusion: Arc::new(diffusion), sigma_floor })
    }
}

impl<T: Scalar> Sde<T> for SdeSpec<T> {
    fn drift(&self, x: T) -> T {
        (self.drift)(x)
    }

    fn diffusion(&self, x: T) -> T {
        (self.diffusion)(x).max(self.sigma_floor)
    }
}

/// Log of the one-step Euler density `phi(x'; x + h mu(x), h sigma(x)^2)`.
pub fn euler_log_density<T: Scalar, S: Sde<T> + ?Sized>(sde: &S, step: T, x: T, x_next: T) -> T {
    let sigma = sde.diffusion(x);
    log_normal_density(x_next, x + step * sde.drift(x), step * sigma * sigma)
}

pub fn euler_density<T: Scalar, S: Sde<T> + ?Sized>(sde: &S, step: T, x: T, x_next: T) -> T {
    euler_log_density(sde, step, x, x_next).exp()
}

/// Observation interval `delta`, number of Euler substeps `K` and bridge paths `L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DgConfig<T> {
    delta: T,
    substeps: usize,
    paths: usize,
}

impl<T: Scalar> DgConfig<T> {
    pub fn new(delta: T, substeps: usize, paths: usize) -> Result<Self> {
        if !(delta > T::zero()) || !delta.is_finite() {
            return Err(Error::invalid("delta must be positive and finite"));
        }
        if substeps == 0 || paths == 0 {
            return Err(Error::invalid("substeps and paths must be at least 1"));
        }
        Ok(DgConfig { delta, substeps, paths })
    }

    /// Configuration from a fine step `eps`; `delta / eps` must be an integer.
    pub fn from_step(delta: T, eps: T, paths: usize) -> Result<Self> {
        if !(eps > T::zero()) {
            return Err(Error::invalid("eps must be positive"));
        }
        let ratio = (delta / eps).as_f64();
        let k = ratio.round();
        if k < 1.0 || (ratio - k).abs() > 1e-6 * k.max(1.0) {
            return Err(Error::invalid(format!("delta / eps = {ratio} is not a positive integer")));
        }
        Self::new(delta, k as usize, paths)
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn eps(&self) -> T {
        self.delta / T::of_usize(self.substeps)
    }
}

/// Importance ratio `prod_k q_eps(z_{k-1}, z_k) / r(z)` for one bridge path.
fn path_ratio<T: Scalar, S: Sde<T> + ?Sized>(sde: &S, path: &BridgePath<T>, eps: T) -> Result<T> {
    let mut log_num = T::zero();
    for k in 1..=path.substeps() {
        log_num = log_num + euler_log_density(sde, eps, path.point(k - 1)[0], path.point(k)[0]);
    }
    Ok((log_num - bridge_log_density(path)?).exp())
}

/// Draws `L` bridges from `x` to `x_next` and returns the transition-density
/// estimate together with the paths used.
pub fn durham_gallant<T, S>(
    sde: &S,
    cfg: &DgConfig<T>,
    x: T,
    x_next: T,
    rng: &mut StreamRng,
) -> Result<(T, Vec<BridgePath<T>>)>
where
    T: Scalar,
    S: Sde<T> + ?Sized,
{
    let eps = cfg.eps();
    let paths = (0..cfg.paths)
        .map(|_| bridge_sample(&[x], &[x_next], cfg.substeps, eps, rng))
        .collect::<Result<Vec<_>>>()?;
    let value = estimate_from_paths(sde, eps, &paths)?;
    Ok((value, paths))
}

fn estimate_from_paths<T: Scalar, S: Sde<T> + ?Sized>(sde: &S, eps: T, paths: &[BridgePath<T>]) -> Result<T> {
    let mut acc = T::zero();
    for p in paths {
        acc = acc + path_ratio(sde, p, eps)?;
    }
    Ok(acc / T::of_usize(paths.len()))
}

/// Transition estimator `q_delta<z>(x, x') g(x, x')` for a partially observed
/// diffusion, with `g` the (tractable) observation density at the next
/// observation.
#[derive(Clone)]
pub struct DurhamGallant<T, S, G> {
    sde: S,
    cfg: DgConfig<T>,
    observation: G,
}

impl<T, S, G> DurhamGallant<T, S, G>
where
    T: Scalar,
    S: Sde<T>,
    G: Fn(T, T) -> T + Send + Sync,
{
    pub fn new(sde: S, cfg: DgConfig<T>, observation: G) -> Self {
        DurhamGallant { sde, cfg, observation }
    }

    pub fn config(&self) -> &DgConfig<T> {
        &self.cfg
    }
}

impl<T, S, G> TransitionEstimator<T> for DurhamGallant<T, S, G>
where
    T: Scalar,
    S: Sde<T>,
    G: Fn(T, T) -> T + Send + Sync,
{
    type Aux = Vec<BridgePath<T>>;

    fn draw_aux(&self, x: &[T], x_next: &[T], rng: &mut StreamRng) -> Self::Aux {
        let eps = self.cfg.eps();
        (0..self.cfg.paths)
            .map(|_| {
                bridge_sample(&x[..1], &x_next[..1], self.cfg.substeps, eps, rng)
                    .expect("validated DgConfig yields a valid bridge")
            })
            .collect()
    }

    fn evaluate(&self, aux: &Self::Aux, x: &[T], x_next: &[T]) -> T {
        match estimate_from_paths(&self.sde, self.cfg.eps(), aux) {
            Ok(q) => q * (self.observation)(x[0], x_next[0]),
            // reported by the caller as an invalid estimate
            Err(_) => T::nan(),
        }
    }
}
