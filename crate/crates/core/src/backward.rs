//! Backward sampling of ancestor indices and the PaRIS statistic update.
//!
//! For each new particle `x' = xi^i_{n+1}` we need draws from the backward
//! kernel `Lambda_n(i, j) ∝ w_j l_n(xi^j_n, x')`. Its normalizing sum costs
//! O(N) per particle, so it is only ever formed in [`lambda_row`] (an oracle
//! used by tests); the production samplers use `cat(w)` as an instrumental law
//! and either accept by rejection against a bound `c(x')` or run an
//! independent Metropolis–Hastings chain. In pseudo-marginal mode the density
//! is replaced by a fresh estimate for every candidate, which targets the
//! extended kernel over `(j, aux)`.

use rand::Rng;
use rayon::prelude::*;

use crate::forward::ForwardOutcome;
use crate::model::{ModelStep, ParticleCloud, TransitionEstimator};
use crate::samplers::{purpose, Categorical, RngStream, StreamRng};
use crate::{DensityMode, Error, Result, Scalar};

pub const DEFAULT_MAX_TRIALS: usize = 1_000_000;
pub const DEFAULT_MH_STEPS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackwardSampler {
    /// Accept-reject against `c(x')`; needs [`TransitionEstimator::bound`].
    Rejection { max_trials: usize },
    /// Independent-proposal MH, keeping every `steps_per_sample`-th state.
    IndependentMh { steps_per_sample: usize },
    /// Up to `max_trials` rejection attempts, then one exact O(N) draw from
    /// the backward row. The output law is exact; ideal mode only.
    RejectionThenExact { max_trials: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BackwardConfig {
    pub sampler: BackwardSampler,
    /// Backward draws per particle.
    pub samples: usize,
}

impl Default for BackwardConfig {
    fn default() -> Self {
        BackwardConfig::rejection(2)
    }
}

impl BackwardConfig {
    pub fn rejection(samples: usize) -> Self {
        BackwardConfig { sampler: BackwardSampler::Rejection { max_trials: DEFAULT_MAX_TRIALS }, samples }
    }

    pub fn independent_mh(samples: usize, steps_per_sample: usize) -> Self {
        BackwardConfig { sampler: BackwardSampler::IndependentMh { steps_per_sample }, samples }
    }

    pub fn rejection_then_exact(samples: usize, max_trials: usize) -> Self {
        BackwardConfig { sampler: BackwardSampler::RejectionThenExact { max_trials }, samples }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::invalid("backward sample count must be at least 1"));
        }
        match self.sampler {
            BackwardSampler::Rejection { max_trials: 0 } | BackwardSampler::RejectionThenExact { max_trials: 0 } => {
                Err(Error::invalid("max_trials must be at least 1"))
            }
            BackwardSampler::IndependentMh { steps_per_sample: 0 } => {
                Err(Error::invalid("steps_per_sample must be at least 1"))
            }
            _ => Ok(()),
        }
    }
}

/// A backward index together with the auxiliary draw that produced its density value.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardDraw<T, A> {
    pub index: usize,
    /// `None` in ideal mode.
    pub aux: Option<A>,
    /// Exact or estimated `l_n(xi^index, x')`.
    pub value: T,
    /// Candidates drawn to reach this state.
    pub attempts: usize,
}

/// Exact backward-kernel row `w_j l(xi^j, x_next) / sum_j' w_j' l(xi^j', x_next)`.
pub fn lambda_row<T, F>(cloud: &ParticleCloud<T>, x_next: &[T], density: F) -> Result<Vec<T>>
where
    T: Scalar,
    F: Fn(&[T], &[T]) -> T,
{
    let numerators: Vec<T> =
        (0..cloud.len()).map(|j| cloud.weights()[j] * density(cloud.particle(j), x_next)).collect();
    if let Some(j) = numerators.iter().position(|v| !v.is_finite() || *v < T::zero()) {
        return Err(Error::InvalidEstimate { index: j, value: numerators[j].as_f64() });
    }
    let total: T = numerators.iter().copied().sum();
    if !(total > T::zero()) {
        return Err(Error::VanishingNormalizer { step: cloud.time_index() });
    }
    Ok(numerators.into_iter().map(|v| v / total).collect())
}

/// [`lambda_row`] with the estimator's exact density.
pub fn lambda_row_exact<T, E>(cloud: &ParticleCloud<T>, x_next: &[T], estimator: &E) -> Result<Vec<T>>
where
    T: Scalar,
    E: TransitionEstimator<T>,
{
    if estimator.exact_density(cloud.particle(0), x_next).is_none() {
        return Err(Error::MissingExactDensity);
    }
    lambda_row(cloud, x_next, |x, y| estimator.exact_density(x, y).unwrap_or_else(T::nan))
}

/// Cloud at time `n` plus the `cat(w)` table shared by every backward draw.
pub struct BackwardContext<'a, T> {
    cloud: &'a ParticleCloud<T>,
    selection: Categorical<T>,
}

impl<'a, T: Scalar> BackwardContext<'a, T> {
    pub fn new(cloud: &'a ParticleCloud<T>) -> Result<Self> {
        Ok(BackwardContext { cloud, selection: Categorical::new(cloud.weights())? })
    }

    pub fn cloud(&self) -> &ParticleCloud<T> {
        self.cloud
    }

    /// Draws `J ~ cat(w)` and, in pseudo-marginal mode, `aux ~ R(xi^J, x_next)`.
    pub fn propose<E>(
        &self,
        x_next: &[T],
        estimator: &E,
        mode: DensityMode,
        rng: &mut StreamRng,
    ) -> Result<BackwardDraw<T, E::Aux>>
    where
        E: TransitionEstimator<T>,
    {
        let index = self.selection.sample(rng);
        let x = self.cloud.particle(index);
        let (value, aux) = match mode {
            DensityMode::Ideal => (estimator.exact_density(x, x_next).ok_or(Error::MissingExactDensity)?, None),
            DensityMode::PseudoMarginal => {
                let aux = estimator.draw_aux(x, x_next, rng);
                (estimator.evaluate(&aux, x, x_next), Some(aux))
            }
        };
        if !value.is_finite() || value < T::zero() {
            return Err(Error::InvalidEstimate { index, value: value.as_f64() });
        }
        Ok(BackwardDraw { index, aux, value, attempts: 1 })
    }

    pub fn sample_rejection<E>(
        &self,
        x_next: &[T],
        estimator: &E,
        mode: DensityMode,
        max_trials: usize,
        rng: &mut StreamRng,
    ) -> Result<BackwardDraw<T, E::Aux>>
    where
        E: TransitionEstimator<T>,
    {
        let bound = estimator.bound(x_next).ok_or(Error::MissingBound)?;
        if !(bound > T::zero()) || !bound.is_finite() {
            return Err(Error::invalid(format!("rejection bound {bound} must be positive and finite")));
        }
        for attempt in 1..=max_trials {
            let mut candidate = self.propose(x_next, estimator, mode, rng)?;
            debug_assert!(candidate.value <= bound * T::of(1.0 + 1e-9), "estimate exceeds its bound");
            let u: f64 = rng.random();
            if T::of(u) * bound < candidate.value {
                candidate.attempts = attempt;
                return Ok(candidate);
            }
        }
        Err(Error::RejectionExhausted { trials: max_trials })
    }

    /// Advances an independent-proposal MH chain targeting the backward kernel by `steps` transitions.
    pub fn advance_mh<E>(
        &self,
        x_next: &[T],
        estimator: &E,
        mode: DensityMode,
        mut current: BackwardDraw<T, E::Aux>,
        steps: usize,
        rng: &mut StreamRng,
    ) -> Result<BackwardDraw<T, E::Aux>>
    where
        E: TransitionEstimator<T>,
    {
        for _ in 0..steps {
            let candidate = self.propose(x_next, estimator, mode, rng)?;
            let u: f64 = rng.random();
            // accept with probability 1 ∧ candidate / current
            let attempts = current.attempts + 1;
            if T::of(u) * current.value < candidate.value || current.value == T::zero() {
                current = candidate;
            }
            current.attempts = attempts;
        }
        Ok(current)
    }
}

/// Rejection sampling of one backward index for `x_next`.
pub fn sample_backward_index_rejection<T, E>(
    cloud: &ParticleCloud<T>,
    x_next: &[T],
    estimator: &E,
    mode: DensityMode,
    max_trials: usize,
    rng: &mut StreamRng,
) -> Result<BackwardDraw<T, E::Aux>>
where
    T: Scalar,
    E: TransitionEstimator<T>,
{
    BackwardContext::new(cloud)?.sample_rejection(x_next, estimator, mode, max_trials, rng)
}

/// `steps` independent-MH transitions from `current`.
pub fn sample_backward_index_mh<T, E>(
    cloud: &ParticleCloud<T>,
    x_next: &[T],
    estimator: &E,
    mode: DensityMode,
    current: BackwardDraw<T, E::Aux>,
    steps: usize,
    rng: &mut StreamRng,
) -> Result<BackwardDraw<T, E::Aux>>
where
    T: Scalar,
    E: TransitionEstimator<T>,
{
    BackwardContext::new(cloud)?.advance_mh(x_next, estimator, mode, current, steps, rng)
}

/// Backward statistics `tau_{n+1}` for the particles of `outcome`.
///
/// Each `tau^i_{n+1}` averages `tau^J_n + h_n(xi^J_n, xi^i_{n+1})` over
/// `config.samples` backward indices `J`. Rejection draws are independent;
/// MH draws are consecutive thinned states of one chain per particle,
/// warm-started from a draw of the instrumental law.
pub fn bs_update<T, S, A>(
    cloud: &ParticleCloud<T>,
    outcome: &ForwardOutcome<T, A>,
    step: &S,
    config: &BackwardConfig,
    mode: DensityMode,
    stream: RngStream,
) -> Result<Vec<T>>
where
    T: Scalar,
    S: ModelStep<T>,
    A: Sync,
{
    config.validate()?;
    if outcome.dim != cloud.dim() {
        return Err(Error::invalid("forward outcome and cloud dimensions differ"));
    }
    let ctx = BackwardContext::new(cloud)?;
    let estimator = step.estimator();
    let time = cloud.time_index() as u64;
    let m = T::of_usize(config.samples);
    let stats = cloud.stats();

    (0..outcome.len())
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.rng_at(time, i as u64, purpose::BACKWARD);
            let x_next = outcome.particle(i);
            let term = |j: usize| stats[j] + step.increment(cloud.particle(j), x_next);
            let mut acc = T::zero();
            match config.sampler {
                BackwardSampler::Rejection { max_trials } => {
                    for _ in 0..config.samples {
                        let draw = ctx.sample_rejection(x_next, estimator, mode, max_trials, &mut rng)?;
                        acc = acc + term(draw.index);
                    }
                }
                BackwardSampler::IndependentMh { steps_per_sample } => {
                    let mut state = ctx.propose(x_next, estimator, mode, &mut rng)?;
                    for _ in 0..config.samples {
                        state = ctx.advance_mh(x_next, estimator, mode, state, steps_per_sample, &mut rng)?;
                        acc = acc + term(state.index);
                    }
                }
                BackwardSampler::RejectionThenExact { max_trials } => {
                    if mode != DensityMode::Ideal {
                        return Err(Error::MissingExactDensity);
                    }
                    let mut row: Option<Categorical<T>> = None;
                    for _ in 0..config.samples {
                        let index = match ctx.sample_rejection(x_next, estimator, mode, max_trials, &mut rng) {
                            Ok(draw) => draw.index,
                            Err(Error::RejectionExhausted { .. }) => {
                                if row.is_none() {
                                    row = Some(Categorical::new(&lambda_row_exact(cloud, x_next, estimator)?)?);
                                }
                                row.as_ref().map(|r| r.sample(&mut rng)).unwrap_or_default()
                            }
                            Err(e) => return Err(e),
                        };
                        acc = acc + term(index);
                    }
                }
            }
            Ok(acc / m)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{exact_wrap, exact_wrap_bounded};
    use crate::model::StepSpec;
    use crate::samplers::derive_seed;
    use proptest::prelude::*;

    fn fixture_cloud() -> ParticleCloud<f64> {
        ParticleCloud::new(1, vec![0.0, 1.0], vec![1.0, 1.0], vec![0.0, 0.0], 0).unwrap()
    }

    fn fixture_density(x: &[f64], _: &[f64]) -> f64 {
        if x[0] == 0.0 { 2.0 } else { 6.0 }
    }

    fn tv(freq: &[f64], p: &[f64]) -> f64 {
        0.5 * freq.iter().zip(p).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }

    #[test]
    fn lambda_row_examples() {
        let one = ParticleCloud::new(1, vec![3.0], vec![2.0], vec![0.0], 0).unwrap();
        assert_eq!(lambda_row(&one, &[0.0], |_, _| 5.0).unwrap(), vec![1.0]);

        let c = ParticleCloud::new(1, vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 5.0], vec![0.0; 3], 0).unwrap();
        let row = lambda_row(&c, &[0.0], |_, _| 0.7).unwrap();
        for (r, w) in row.iter().zip([0.125f64, 0.25, 0.625]) {
            assert!((r - w).abs() < 1e-15);
        }

        assert_eq!(lambda_row(&fixture_cloud(), &[0.0], fixture_density).unwrap(), vec![0.25, 0.75]);
        assert!(lambda_row(&fixture_cloud(), &[0.0], |_, _| 0.0).is_err());
    }

    #[test]
    fn lambda_row_exact_requires_density() {
        let est = exact_wrap(fixture_density);
        assert_eq!(lambda_row_exact(&fixture_cloud(), &[0.0], &est).unwrap(), vec![0.25, 0.75]);
    }

    #[test]
    fn tight_bound_accepts_first_candidate() {
        let est = exact_wrap_bounded(|_: &[f64], _: &[f64]| 4.0, |_: &[f64]| 4.0);
        let c = ParticleCloud::new(1, vec![0.0, 1.0], vec![1.0, 3.0], vec![0.0; 2], 0).unwrap();
        let ctx = BackwardContext::new(&c).unwrap();
        let mut rng = RngStream::new(1).rng();
        let mut ones = 0;
        let n = 20_000;
        for _ in 0..n {
            let d = ctx.sample_rejection(&[0.0], &est, DensityMode::Ideal, 10, &mut rng).unwrap();
            assert_eq!(d.attempts, 1);
            ones += d.index;
        }
        assert!((ones as f64 / n as f64 - 0.75).abs() < 0.015);
    }

    #[test]
    fn rejection_matches_lambda_row_and_acceptance_rate() {
        let est = exact_wrap_bounded(fixture_density, |_: &[f64]| 6.0);
        let c = fixture_cloud();
        let ctx = BackwardContext::new(&c).unwrap();
        let mut rng = RngStream::new(2).rng();
        let draws = 100_000;
        let mut counts = [0usize; 2];
        let mut attempts = 0usize;
        for _ in 0..draws {
            let d = ctx.sample_rejection(&[0.0], &est, DensityMode::PseudoMarginal, 1000, &mut rng).unwrap();
            counts[d.index] += 1;
            attempts += d.attempts;
        }
        let freq: Vec<f64> = counts.iter().map(|&k| k as f64 / draws as f64).collect();
        assert!(tv(&freq, &[0.25, 0.75]) < 0.01, "{freq:?}");
        let rate = draws as f64 / attempts as f64;
        let p = 2.0 / 3.0;
        assert!((rate - p).abs() < 3.0 * (p * (1.0 - p) / attempts as f64).sqrt(), "rate {rate}");
    }

    #[test]
    fn rejection_errors() {
        let c = fixture_cloud();
        let mut rng = RngStream::new(3).rng();
        let unbounded = exact_wrap(fixture_density);
        assert_eq!(
            sample_backward_index_rejection(&c, &[0.0], &unbounded, DensityMode::Ideal, 10, &mut rng),
            Err(Error::MissingBound)
        );
        let loose = exact_wrap_bounded(|_: &[f64], _: &[f64]| 1e-9, |_: &[f64]| 1e9);
        assert_eq!(
            sample_backward_index_rejection(&c, &[0.0], &loose, DensityMode::Ideal, 10, &mut rng),
            Err(Error::RejectionExhausted { trials: 10 })
        );
    }

    #[test]
    fn constant_estimator_mh_always_accepts() {
        let est = exact_wrap(|_: &[f64], _: &[f64]| 3.0);
        let c = ParticleCloud::new(1, vec![0.0, 1.0], vec![1.0, 3.0], vec![0.0; 2], 0).unwrap();
        let ctx = BackwardContext::new(&c).unwrap();
        let mut rng = RngStream::new(4).rng();
        let n = 20_000;
        let mut ones = 0;
        for _ in 0..n {
            let start = BackwardDraw { index: 0, aux: Some(()), value: 3.0, attempts: 0 };
            let d = ctx.advance_mh(&[0.0], &est, DensityMode::PseudoMarginal, start, 1, &mut rng).unwrap();
            ones += d.index;
        }
        assert!((ones as f64 / n as f64 - 0.75).abs() < 0.015);
    }

    #[test]
    fn mh_self_proposal_is_accepted() {
        let est = exact_wrap(|_: &[f64], _: &[f64]| 2.5);
        let c = ParticleCloud::new(1, vec![1.0], vec![1.0], vec![0.0], 0).unwrap();
        let mut rng = RngStream::new(5).rng();
        let start = BackwardDraw { index: 0, aux: None, value: 2.5, attempts: 0 };
        let d = sample_backward_index_mh(&c, &[0.0], &est, DensityMode::Ideal, start, 3, &mut rng).unwrap();
        assert_eq!((d.index, d.value, d.attempts), (0, 2.5, 3));
    }

    #[test]
    fn mh_chain_targets_lambda_row() {
        let est = exact_wrap(fixture_density);
        let c = fixture_cloud();
        let ctx = BackwardContext::new(&c).unwrap();
        let mut rng = RngStream::new(6).rng();
        let mut state = BackwardDraw { index: 0, aux: None, value: 2.0, attempts: 0 };
        let n = 100_000;
        let mut ones = 0;
        for _ in 0..n {
            state = ctx.advance_mh(&[0.0], &est, DensityMode::Ideal, state, 5, &mut rng).unwrap();
            ones += state.index;
        }
        let f = ones as f64 / n as f64;
        assert!(tv(&[1.0 - f, f], &[0.25, 0.75]) < 0.02, "{f}");
    }

    fn outcome(particles: Vec<f64>) -> ForwardOutcome<f64, ()> {
        let n = particles.len();
        ForwardOutcome { dim: 1, particles, weights: vec![1.0; n], ancestors: vec![0; n], aux: vec![] }
    }

    fn fixture_step(increment: fn(&[f64], &[f64]) -> f64) -> impl ModelStep<f64> {
        StepSpec::new(
            exact_wrap_bounded(fixture_density, |_: &[f64]| 6.0),
            |x: &[f64], out: &mut [f64], _: &mut StreamRng| out.copy_from_slice(x),
            |_: &[f64], _: &[f64]| 1.0,
        )
        .with_increment(increment)
    }

    #[test]
    fn single_particle_update_adds_increment() {
        let c = ParticleCloud::new(1, vec![0.0], vec![1.0], vec![1.5], 3).unwrap();
        let step = fixture_step(|x, y| x[0] + 2.0 * y[0]);
        let cfg = BackwardConfig::rejection(1);
        let tau = bs_update(&c, &outcome(vec![4.0]), &step, &cfg, DensityMode::Ideal, RngStream::new(0)).unwrap();
        assert_eq!(tau, vec![1.5 + 8.0]);
    }

    #[test]
    fn zero_increment_keeps_zero_stats() {
        let c = fixture_cloud();
        let step = fixture_step(|_, _| 0.0);
        for cfg in [BackwardConfig::rejection(3), BackwardConfig::independent_mh(2, 5)] {
            let tau = bs_update(&c, &outcome(vec![0.2, -1.0, 5.0]), &step, &cfg, DensityMode::PseudoMarginal, RngStream::new(1)).unwrap();
            assert_eq!(tau, vec![0.0; 3]);
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let c = fixture_cloud();
        let step = fixture_step(|_, _| 0.0);
        for cfg in [BackwardConfig::rejection(0), BackwardConfig::independent_mh(1, 0)] {
            assert!(bs_update(&c, &outcome(vec![0.0]), &step, &cfg, DensityMode::Ideal, RngStream::new(1)).is_err());
        }
    }

    #[test]
    fn exact_fallback_needs_ideal_mode() {
        let c = fixture_cloud();
        let step = fixture_step(|_, _| 0.0);
        let cfg = BackwardConfig::rejection_then_exact(1, 1);
        let r = bs_update(&c, &outcome(vec![0.0]), &step, &cfg, DensityMode::PseudoMarginal, RngStream::new(1));
        assert_eq!(r, Err(Error::MissingExactDensity));
        assert!(BackwardConfig::rejection_then_exact(1, 0).validate().is_err());
    }

    fn stat_samples(cfg: BackwardConfig, reps: u64, seed: u64) -> Vec<f64> {
        let c = ParticleCloud::new(1, vec![0.0, 1.0], vec![1.0, 1.0], vec![1.0, 3.0], 0).unwrap();
        let step = fixture_step(|x, y| x[0] * y[0] - 0.5);
        let out = outcome(vec![2.0]);
        (0..reps)
            .map(|r| bs_update(&c, &out, &step, &cfg, DensityMode::Ideal, RngStream::new(derive_seed(seed, r))).unwrap()[0])
            .collect()
    }

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        (mean, xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0))
    }

    #[test]
    fn expected_statistic_is_lambda_average() {
        // Lambda = (0.25, 0.75); terms: tau_j + x_j * 2 - 0.5 = (0.5, 4.5)
        let want = 0.25 * 0.5 + 0.75 * 4.5;
        for cfg in [
            BackwardConfig::rejection(2),
            BackwardConfig::independent_mh(2, 5),
            BackwardConfig::rejection_then_exact(2, 1),
        ] {
            let xs = stat_samples(cfg, 100_000, 7);
            let (mean, var) = mean_var(&xs);
            assert!((mean - want).abs() < 3.0 * (var / xs.len() as f64).sqrt(), "{cfg:?}: mean {mean}");
        }
    }

    #[test]
    fn variance_scales_inversely_with_samples() {
        let (_, v1) = mean_var(&stat_samples(BackwardConfig::rejection(1), 40_000, 8));
        let (_, v16) = mean_var(&stat_samples(BackwardConfig::rejection(16), 40_000, 9));
        let ratio = v1 / v16;
        assert!((8.0..=32.0).contains(&ratio), "ratio {ratio}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn update_is_a_convex_combination(
            stats in prop::collection::vec(-10.0f64..10.0, 1..8),
            next in prop::collection::vec(-3.0f64..3.0, 1..5),
            seed in any::<u64>(),
        ) {
            let n = stats.len();
            let xs: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
            let c = ParticleCloud::new(1, xs, vec![1.0; n], stats.clone(), 0).unwrap();
            // |h| <= 1
            let step = fixture_step(|x, y| (x[0] - y[0]).sin());
            let tau = bs_update(&c, &outcome(next), &step, &BackwardConfig::independent_mh(3, 2), DensityMode::Ideal, RngStream::new(seed)).unwrap();
            let max_tau = stats.iter().fold(0.0f64, |m, t| m.max(t.abs()));
            for t in tau {
                prop_assert!(t.abs() <= max_tau + 1.0 + 1e-12);
            }
        }
    }
}
