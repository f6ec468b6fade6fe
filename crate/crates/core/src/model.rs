//! Feynman–Kac path-model abstraction and the weighted particle cloud.
//!
//! A model is an initial proposal `nu` with weight `d chi / d nu`, plus, for
//! every step `n`, an adjustment-weight function, a proposal kernel with a
//! tractable density, an estimator of the unnormalized transition density
//! `l_n`, and the additive increment `h_n`. States are fixed-dimension real
//! vectors passed around as slices.

use std::fmt::Debug;
use std::sync::Arc;

use rayon::prelude::*;

use crate::samplers::{purpose, RngStream, StreamRng};
use crate::{Error, Result, Scalar};

/// Estimator of an unnormalized transition density `l_n(x, x')`.
///
/// Drawing `aux ~ R_n(x, x', .)` and evaluating yields a nonnegative estimate
/// whose conditional mean defines the (possibly skewed) density the smoother
/// targets.
pub trait TransitionEstimator<T: Scalar>: Send + Sync {
    type Aux: Clone + Debug + Send + Sync;

    fn draw_aux(&self, x: &[T], x_next: &[T], rng: &mut StreamRng) -> Self::Aux;

    /// Deterministic in `(aux, x, x_next)`.
    fn evaluate(&self, aux: &Self::Aux, x: &[T], x_next: &[T]) -> T;

    /// The exact density, for tractable models only.
    fn exact_density(&self, _x: &[T], _x_next: &[T]) -> Option<T> {
        None
    }

    /// `c(x')` with `evaluate(z, x, x') <= c(x')` for every `x` and `z`.
    fn bound(&self, _x_next: &[T]) -> Option<T> {
        None
    }
}

/// Model components active between times `n` and `n + 1`.
pub trait ModelStep<T: Scalar>: Send + Sync {
    type Estimator: TransitionEstimator<T>;

    /// Adjustment weight `theta_n(x) > 0` used when selecting ancestors.
    fn adjustment(&self, _x: &[T]) -> T {
        T::one()
    }

    fn sample_proposal(&self, x: &[T], out: &mut [T], rng: &mut StreamRng);

    fn proposal_density(&self, x: &[T], x_next: &[T]) -> T;

    fn estimator(&self) -> &Self::Estimator;

    /// Additive-functional term `h_n(x_n, x_{n+1})`.
    fn increment(&self, x: &[T], x_next: &[T]) -> T;
}

/// A path model consumed lazily, one step at a time.
pub trait PathModel<T: Scalar>: Send + Sync {
    type Step: ModelStep<T>;

    fn state_dim(&self) -> usize;

    fn sample_initial(&self, out: &mut [T], rng: &mut StreamRng);

    /// `d chi / d nu` at `x`.
    fn initial_weight(&self, _x: &[T]) -> T {
        T::one()
    }

    fn step(&self, n: usize) -> Result<Self::Step>;
}

/// Particles, weights and backward statistics at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleCloud<T> {
    dim: usize,
    particles: Vec<T>,
    weights: Vec<T>,
    stats: Vec<T>,
    time_index: usize,
}

impl<T: Scalar> ParticleCloud<T> {
    /// `particles` is row-major: particle `i` occupies `i * dim .. (i + 1) * dim`.
    pub fn new(dim: usize, particles: Vec<T>, weights: Vec<T>, stats: Vec<T>, time_index: usize) -> Result<Self> {
        let n = weights.len();
        if dim == 0 {
            return Err(Error::invalid("state dimension must be positive"));
        }
        if n == 0 {
            return Err(Error::invalid("a particle cloud needs at least one particle"));
        }
        if particles.len() != n * dim || stats.len() != n {
            return Err(Error::invalid(format!(
                "misaligned cloud: {} particle values (dim {dim}), {n} weights, {} stats",
                particles.len(),
                stats.len()
            )));
        }
        let mut total = T::zero();
        for (index, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < T::zero() {
                return Err(Error::InvalidWeight { index, value: w.as_f64() });
            }
            total = total + w;
        }
        if !(total > T::zero()) || !total.is_finite() {
            return Err(Error::DegenerateWeights { time_index });
        }
        Ok(ParticleCloud { dim, particles, weights, stats, time_index })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn time_index(&self) -> usize {
        self.time_index
    }

    pub fn particle(&self, i: usize) -> &[T] {
        &self.particles[i * self.dim..(i + 1) * self.dim]
    }

    pub fn particles(&self) -> &[T] {
        &self.particles
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn stats(&self) -> &[T] {
        &self.stats
    }

    pub fn total_weight(&self) -> T {
        self.weights.iter().copied().sum()
    }

    /// Self-normalised estimate `sum_i w_i f(x_i) / sum_i w_i`.
    pub fn weighted_mean<F>(&self, f: F) -> T
    where
        F: Fn(&[T]) -> T,
    {
        let num: T = (0..self.len()).map(|i| self.weights[i] * f(self.particle(i))).sum();
        num / self.total_weight()
    }

    /// `sum_i w_i tau_i / sum_i w_i`, the online smoothing estimate.
    pub fn smoothing_estimate(&self) -> T {
        let num: T = self.weights.iter().zip(&self.stats).map(|(&w, &t)| w * t).sum();
        num / self.total_weight()
    }

    /// Effective sample size `(sum w)^2 / sum w^2`.
    pub fn ess(&self) -> T {
        let total = self.total_weight();
        let sq: T = self.weights.iter().map(|&w| w * w).sum();
        total * total / sq
    }

    /// Coefficient of variation of the weights.
    pub fn weight_cv(&self) -> T {
        let n = T::of_usize(self.len());
        let mean = self.total_weight() / n;
        let var: T = self.weights.iter().map(|&w| (w - mean) * (w - mean)).sum::<T>() / n;
        var.sqrt() / mean
    }
}

/// Draws `n` initial particles from `nu` with weights `d chi / d nu` and zero statistics.
pub fn init_cloud<T, M>(model: &M, n: usize, stream: RngStream) -> Result<ParticleCloud<T>>
where
    T: Scalar,
    M: PathModel<T> + ?Sized,
{
    if n == 0 {
        return Err(Error::invalid("particle count must be at least 1"));
    }
    let dim = model.state_dim();
    if dim == 0 {
        return Err(Error::invalid("state dimension must be positive"));
    }
    let mut particles = vec![T::zero(); n * dim];
    let weights: Vec<T> = particles
        .par_chunks_mut(dim)
        .enumerate()
        .map(|(i, out)| {
            let mut rng = stream.rng_at(0, i as u64, purpose::INIT);
            model.sample_initial(out, &mut rng);
            model.initial_weight(out)
        })
        .collect();
    for (index, &w) in weights.iter().enumerate() {
        if !w.is_finite() || w < T::zero() {
            return Err(Error::InvalidWeight { index, value: w.as_f64() });
        }
    }
    if weights.iter().all(|&w| w == T::zero()) {
        return Err(Error::DegenerateInitialization { n });
    }
    ParticleCloud::new(dim, particles, weights, vec![T::zero(); n], 0)
}

type StateFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;
type PairFn<T> = Arc<dyn Fn(&[T], &[T]) -> T + Send + Sync>;
type MoveFn<T> = Arc<dyn Fn(&[T], &mut [T], &mut StreamRng) + Send + Sync>;
type InitFn<T> = Arc<dyn Fn(&mut [T], &mut StreamRng) + Send + Sync>;
type StepFn<T, E> = Arc<dyn Fn(usize) -> StepSpec<T, E> + Send + Sync>;

/// Closure-backed [`ModelStep`].
pub struct StepSpec<T, E> {
    adjustment: StateFn<T>,
    proposal_sample: MoveFn<T>,
    proposal_density: PairFn<T>,
    estimator: E,
    increment: PairFn<T>,
}

impl<T, E: Clone> Clone for StepSpec<T, E> {
    fn clone(&self) -> Self {
        StepSpec {
            adjustment: self.adjustment.clone(),
            proposal_sample: self.proposal_sample.clone(),
            proposal_density: self.proposal_density.clone(),
            estimator: self.estimator.clone(),
            increment: self.increment.clone(),
        }
    }
}

impl<T: Scalar, E: TransitionEstimator<T>> StepSpec<T, E> {
    /// Step with unit adjustment weights and a zero increment.
    pub fn new<S, D>(estimator: E, proposal_sample: S, proposal_density: D) -> Self
    where
        S: Fn(&[T], &mut [T], &mut StreamRng) + Send + Sync + 'static,
        D: Fn(&[T], &[T]) -> T + Send + Sync + 'static,
    {
        StepSpec {
            adjustment: Arc::new(|_| T::one()),
            proposal_sample: Arc::new(proposal_sample),
            proposal_density: Arc::new(proposal_density),
            estimator,
            increment: Arc::new(|_, _| T::zero()),
        }
    }

    pub fn with_adjustment(mut self, f: impl Fn(&[T]) -> T + Send + Sync + 'static) -> Self {
        self.adjustment = Arc::new(f);
        self
    }

    pub fn with_increment(mut self, f: impl Fn(&[T], &[T]) -> T + Send + Sync + 'static) -> Self {
        self.increment = Arc::new(f);
        self
    }
}

impl<T: Scalar, E: TransitionEstimator<T>> ModelStep<T> for StepSpec<T, E> {
    type Estimator = E;

    fn adjustment(&self, x: &[T]) -> T {
        (self.adjustment)(x)
    }

    fn sample_proposal(&self, x: &[T], out: &mut [T], rng: &mut StreamRng) {
        (self.proposal_sample)(x, out, rng)
    }

    fn proposal_density(&self, x: &[T], x_next: &[T]) -> T {
        (self.proposal_density)(x, x_next)
    }

    fn estimator(&self) -> &E {
        &self.estimator
    }

    fn increment(&self, x: &[T], x_next: &[T]) -> T {
        (self.increment)(x, x_next)
    }
}

/// Closure-backed [`PathModel`] whose steps are produced on demand.
pub struct ModelSpec<T, E> {
    dim: usize,
    initial_sampler: InitFn<T>,
    initial_weight: StateFn<T>,
    steps: StepFn<T, E>,
}

impl<T, E> Clone for ModelSpec<T, E> {
    fn clone(&self) -> Self {
        ModelSpec {
            dim: self.dim,
            initial_sampler: self.initial_sampler.clone(),
            initial_weight: self.initial_weight.clone(),
            steps: self.steps.clone(),
        }
    }
}

impl<T: Scalar, E: TransitionEstimator<T>> ModelSpec<T, E> {
    /// `nu = chi` (unit initial weights) until [`with_initial_weight`](Self::with_initial_weight) is called.
    pub fn new<I, S>(dim: usize, initial_sampler: I, steps: S) -> Self
    where
        I: Fn(&mut [T], &mut StreamRng) + Send + Sync + 'static,
        S: Fn(usize) -> StepSpec<T, E> + Send + Sync + 'static,
    {
        ModelSpec {
            dim,
            initial_sampler: Arc::new(initial_sampler),
            initial_weight: Arc::new(|_| T::one()),
            steps: Arc::new(steps),
        }
    }

    /// Time-homogeneous model repeating `step` forever.
    pub fn homogeneous<I>(dim: usize, initial_sampler: I, step: StepSpec<T, E>) -> Self
    where
        I: Fn(&mut [T], &mut StreamRng) + Send + Sync + 'static,
        E: Clone + 'static,
    {
        Self::new(dim, initial_sampler, move |_| step.clone())
    }

    pub fn with_initial_weight(mut self, f: impl Fn(&[T]) -> T + Send + Sync + 'static) -> Self {
        self.initial_weight = Arc::new(f);
        self
    }
}

impl<T: Scalar, E: TransitionEstimator<T>> PathModel<T> for ModelSpec<T, E> {
    type Step = StepSpec<T, E>;

    fn state_dim(&self) -> usize {
        self.dim
    }

    fn sample_initial(&self, out: &mut [T], rng: &mut StreamRng) {
        (self.initial_sampler)(out, rng)
    }

    fn initial_weight(&self, x: &[T]) -> T {
        (self.initial_weight)(x)
    }

    fn step(&self, n: usize) -> Result<Self::Step> {
        Ok((self.steps)(n))
    }
}
