//! Path models on a finite state space `{0, ..., S-1}` with exact smoothing.
//!
//! A state is stored in a one-dimensional particle as its index.

use std::sync::Arc;

use rand::Rng;

use crate::model::{ModelStep, PathModel, TransitionEstimator};
use crate::samplers::{Categorical, RngStream, StreamRng};
use crate::{Error, Result, Scalar};

/// Initial law, per-step unnormalized transition matrices `l_m(i, j)` and
/// additive increments `h_m(i, j)`, all `S x S` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteHmm<T> {
    states: usize,
    init: Vec<T>,
    trans: Vec<Vec<T>>,
    increments: Vec<Vec<T>>,
}

impl<T: Scalar> FiniteHmm<T> {
    pub fn new(states: usize, init: Vec<T>, trans: Vec<Vec<T>>, increments: Vec<Vec<T>>) -> Result<Self> {
        if states == 0 || init.len() != states {
            return Err(Error::invalid("init must have one entry per state"));
        }
        let total: T = init.iter().copied().sum();
        if init.iter().any(|&p| !(p >= T::zero())) || (total - T::one()).abs() > T::of(1e-9).max(T::epsilon() * T::of(16.0)) {
            return Err(Error::invalid("init must be a probability vector"));
        }
        if trans.len() != increments.len() {
            return Err(Error::invalid("one increment matrix per transition matrix"));
        }
        let sq = states * states;
        for (m, (l, h)) in trans.iter().zip(&increments).enumerate() {
            if l.len() != sq || h.len() != sq {
                return Err(Error::invalid(format!("step {m}: matrices must be {states}x{states}")));
            }
            if l.iter().any(|&v| !(v >= T::zero()) || !v.is_finite()) || h.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("step {m}: entries must be finite, transitions nonnegative")));
            }
            if l.chunks(states).any(|row| row.iter().all(|&v| v == T::zero())) {
                return Err(Error::invalid(format!("step {m}: every row needs a positive entry")));
            }
        }
        Ok(FiniteHmm { states, init, trans, increments })
    }

    /// Random instance: transition entries uniform on `[0.05, 1)`, increments
    /// standard normal, initial law from normalized uniforms.
    pub fn random(states: usize, steps: usize, seed: u64) -> Result<Self> {
        let mut rng = RngStream::new(seed).rng();
        let raw: Vec<f64> = (0..states).map(|_| rng.random_range(0.05..1.0)).collect();
        let z: f64 = raw.iter().sum();
        let init = raw.iter().map(|&p| T::of(p / z)).collect();
        let sq = states * states;
        let mut trans = Vec::with_capacity(steps);
        let mut increments = Vec::with_capacity(steps);
        for _ in 0..steps {
            trans.push((0..sq).map(|_| T::of(rng.random_range(0.05..1.0))).collect());
            increments.push((0..sq).map(|_| crate::samplers::standard_normal::<T, _>(&mut rng)).collect());
        }
        Self::new(states, init, trans, increments)
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn steps(&self) -> usize {
        self.trans.len()
    }

    pub fn init(&self) -> &[T] {
        &self.init
    }

    pub fn transition(&self, m: usize, i: usize, j: usize) -> T {
        self.trans[m][i * self.states + j]
    }

    pub fn increment(&self, m: usize, i: usize, j: usize) -> T {
        self.increments[m][i * self.states + j]
    }

    /// Exact smoothed expectation of `sum_{m < n} h_m(x_m, x_{m+1})` by the
    /// forward-smoothing recursion on filter probabilities and `T_n` values.
    pub fn exact_additive_smoothing(&self, n: usize) -> Result<T> {
        if n == 0 || n > self.steps() {
            return Err(Error::invalid(format!("horizon must lie in 1..={}, got {n}", self.steps())));
        }
        let s = self.states;
        let mut filter = self.init.clone();
        let mut t_stat = vec![T::zero(); s];
        for m in 0..n {
            let mut next_filter = vec![T::zero(); s];
            let mut next_t = vec![T::zero(); s];
            for j in 0..s {
                let mut mass = T::zero();
                let mut acc = T::zero();
                for i in 0..s {
                    let w = filter[i] * self.transition(m, i, j);
                    mass = mass + w;
                    acc = acc + w * (t_stat[i] + self.increment(m, i, j));
                }
                next_filter[j] = mass;
                if mass > T::zero() {
                    next_t[j] = acc / mass;
                }
            }
            let z: T = next_filter.iter().copied().sum();
            if !(z > T::zero()) || !z.is_finite() {
                return Err(Error::VanishingNormalizer { step: m + 1 });
            }
            for p in next_filter.iter_mut() {
                *p = *p / z;
            }
            filter = next_filter;
            t_stat = next_t;
        }
        Ok(filter.iter().zip(&t_stat).map(|(&p, &t)| p * t).sum())
    }
}

impl<T: Scalar> FiniteHmm<T> {
    /// The same expectation by summing over all `S^(n+1)` paths; capped at 10^7 paths.
    pub fn enumerate_additive_smoothing(&self, n: usize) -> Result<T> {
        if n == 0 || n > self.steps() {
            return Err(Error::invalid(format!("horizon must lie in 1..={}, got {n}", self.steps())));
        }
        let s = self.states;
        let total = (s as f64).powi(n as i32 + 1);
        if total > 1e7 {
            return Err(Error::invalid(format!("{total} paths is too many to enumerate")));
        }
        let (mut num, mut den) = (T::zero(), T::zero());
        let mut path = vec![0usize; n + 1];
        for mut code in 0..total as usize {
            for slot in path.iter_mut() {
                *slot = code % s;
                code /= s;
            }
            let mut w = self.init[path[0]];
            let mut h = T::zero();
            for m in 0..n {
                w = w * self.transition(m, path[m], path[m + 1]);
                h = h + self.increment(m, path[m], path[m + 1]);
            }
            num = num + w * h;
            den = den + w;
        }
        if !(den > T::zero()) {
            return Err(Error::VanishingNormalizer { step: n });
        }
        Ok(num / den)
    }
}

fn index_of<T: Scalar>(x: &[T]) -> usize {
    x[0].as_f64() as usize
}

/// One step of a [`FiniteHmm`] as a particle model: the proposal is the
/// row-normalized transition matrix, adjustment weights are 1 and the
/// transition density is known exactly, bounded by its column maxima.
#[derive(Debug, Clone)]
pub struct FiniteStep<T> {
    hmm: Arc<FiniteHmm<T>>,
    step: usize,
    rows: Vec<Categorical<T>>,
    column_max: Vec<T>,
}

impl<T: Scalar> FiniteStep<T> {
    fn new(hmm: Arc<FiniteHmm<T>>, step: usize) -> Result<Self> {
        let s = hmm.states;
        let rows = hmm.trans[step].chunks(s).map(Categorical::new).collect::<Result<Vec<_>>>()?;
        let column_max = (0..s)
            .map(|j| (0..s).map(|i| hmm.transition(step, i, j)).fold(T::zero(), T::max))
            .collect();
        Ok(FiniteStep { hmm, step, rows, column_max })
    }
}

impl<T: Scalar> TransitionEstimator<T> for FiniteStep<T> {
    type Aux = ();

    fn draw_aux(&self, _x: &[T], _x_next: &[T], _rng: &mut StreamRng) {}

    fn evaluate(&self, _aux: &(), x: &[T], x_next: &[T]) -> T {
        self.hmm.transition(self.step, index_of(x), index_of(x_next))
    }

    fn exact_density(&self, x: &[T], x_next: &[T]) -> Option<T> {
        Some(self.evaluate(&(), x, x_next))
    }

    fn bound(&self, x_next: &[T]) -> Option<T> {
        Some(self.column_max[index_of(x_next)])
    }
}

impl<T: Scalar> ModelStep<T> for FiniteStep<T> {
    type Estimator = Self;

    fn sample_proposal(&self, x: &[T], out: &mut [T], rng: &mut StreamRng) {
        out[0] = T::of_usize(self.rows[index_of(x)].sample(rng));
    }

    fn proposal_density(&self, x: &[T], x_next: &[T]) -> T {
        let row = &self.rows[index_of(x)];
        row.probability(index_of(x_next))
    }

    fn estimator(&self) -> &Self {
        self
    }

    fn increment(&self, x: &[T], x_next: &[T]) -> T {
        self.hmm.increment(self.step, index_of(x), index_of(x_next))
    }
}

/// Particle model view; built once so steps share the matrices.
impl<T: Scalar> PathModel<T> for Arc<FiniteHmm<T>> {
    type Step = FiniteStep<T>;

    fn state_dim(&self) -> usize {
        1
    }

    fn sample_initial(&self, out: &mut [T], rng: &mut StreamRng) {
        let init = Categorical::new(&self.init).expect("validated probability vector");
        out[0] = T::of_usize(init.sample(rng));
    }

    fn step(&self, n: usize) -> Result<FiniteStep<T>> {
        if n >= self.steps() {
            return Err(Error::invalid(format!("model has only {} steps", self.steps())));
        }
        FiniteStep::new(Arc::clone(self), n)
    }
}
