//! Forward sampling: selection by adjusted weights, mutation through the
//! proposal kernel, and reweighting with either the exact transition density
//! or a pseudo-marginal estimate of it.

use rayon::prelude::*;

use crate::model::{ModelStep, ParticleCloud, TransitionEstimator};
use crate::samplers::{purpose, Categorical, RngStream};
use crate::{DensityMode, Error, Result, Scalar};

/// New particles and weights produced from a cloud at time `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutcome<T, A> {
    pub dim: usize,
    /// Row-major new particles.
    pub particles: Vec<T>,
    pub weights: Vec<T>,
    pub ancestors: Vec<usize>,
    /// One auxiliary draw per particle; empty in ideal mode.
    pub aux: Vec<A>,
}

impl<T: Scalar, A> ForwardOutcome<T, A> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn particle(&self, i: usize) -> &[T] {
        &self.particles[i * self.dim..(i + 1) * self.dim]
    }
}

type Outcome<S, T> = ForwardOutcome<T, <<S as ModelStep<T>>::Estimator as TransitionEstimator<T>>::Aux>;

/// Forward sampling with the exact transition density.
pub fn fs_update<T, S>(cloud: &ParticleCloud<T>, step: &S, stream: RngStream) -> Result<Outcome<S, T>>
where
    T: Scalar,
    S: ModelStep<T>,
{
    forward_update(cloud, step, stream, DensityMode::Ideal)
}

/// Forward sampling with the transition density replaced by an estimate.
pub fn pmfs_update<T, S>(cloud: &ParticleCloud<T>, step: &S, stream: RngStream) -> Result<Outcome<S, T>>
where
    T: Scalar,
    S: ModelStep<T>,
{
    forward_update(cloud, step, stream, DensityMode::PseudoMarginal)
}

pub fn forward_update<T, S>(
    cloud: &ParticleCloud<T>,
    step: &S,
    stream: RngStream,
    mode: DensityMode,
) -> Result<Outcome<S, T>>
where
    T: Scalar,
    S: ModelStep<T>,
{
    let n = cloud.len();
    let dim = cloud.dim();
    let time = cloud.time_index() as u64;
    let estimator = step.estimator();

    let adjustments: Vec<T> = (0..n).into_par_iter().map(|l| step.adjustment(cloud.particle(l))).collect();
    if let Some(l) = adjustments.iter().position(|&a| !(a > T::zero()) || !a.is_finite()) {
        return Err(Error::invalid(format!("adjustment weight {} at particle {l} is not positive", adjustments[l])));
    }
    let adjusted: Vec<T> = adjustments.iter().zip(cloud.weights()).map(|(&a, &w)| a * w).collect();
    let selection = Categorical::new(&adjusted)?;

    let mut particles = vec![T::zero(); n * dim];
    let drawn: Vec<(usize, T, Option<_>)> = particles
        .par_chunks_mut(dim)
        .enumerate()
        .map(|(i, out)| {
            let mut rng = stream.rng_at(time, i as u64, purpose::FORWARD);
            let ancestor = selection.sample(&mut rng);
            let x = cloud.particle(ancestor);
            step.sample_proposal(x, out, &mut rng);
            let (value, aux) = match mode {
                DensityMode::Ideal => (estimator.exact_density(x, out).ok_or(Error::MissingExactDensity)?, None),
                DensityMode::PseudoMarginal => {
                    let aux = estimator.draw_aux(x, out, &mut rng);
                    (estimator.evaluate(&aux, x, out), Some(aux))
                }
            };
            if !value.is_finite() || value < T::zero() {
                return Err(Error::InvalidEstimate { index: i, value: value.as_f64() });
            }
            let weight = value / (adjustments[ancestor] * step.proposal_density(x, out));
            if !weight.is_finite() || weight < T::zero() {
                return Err(Error::InvalidWeight { index: i, value: weight.as_f64() });
            }
            Ok((ancestor, weight, aux))
        })
        .collect::<Result<_>>()?;

    let mut ancestors = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut aux = Vec::with_capacity(if mode == DensityMode::Ideal { 0 } else { n });
    for (a, w, z) in drawn {
        ancestors.push(a);
        weights.push(w);
        aux.extend(z);
    }
    if !(weights.iter().copied().sum::<T>() > T::zero()) {
        return Err(Error::DegenerateWeights { time_index: cloud.time_index() + 1 });
    }
    Ok(ForwardOutcome { dim, particles, weights, ancestors, aux })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::exact_wrap;
    use crate::model::{StepSpec, TransitionEstimator};
    use crate::samplers::{normal_density, standard_normal, StreamRng};
    use rand::Rng;

    /// Two-state fixture: states {0, 1}, unnormalized transition matrix,
    /// non-uniform proposal and adjustment.
    const L: [[f64; 2]; 2] = [[0.6, 0.9], [0.2, 1.5]];
    const P: [[f64; 2]; 2] = [[0.3, 0.7], [0.5, 0.5]];
    const THETA: [f64; 2] = [1.0, 2.5];

    fn two_state_step() -> StepSpec<f64, impl TransitionEstimator<f64, Aux = ()> + Clone> {
        let est = exact_wrap(|x: &[f64], y: &[f64]| L[x[0] as usize][y[0] as usize]);
        StepSpec::new(
            est,
            |x: &[f64], out: &mut [f64], rng: &mut StreamRng| {
                let u: f64 = rng.random();
                out[0] = if u < P[x[0] as usize][0] { 0.0 } else { 1.0 };
            },
            |x: &[f64], y: &[f64]| P[x[0] as usize][y[0] as usize],
        )
        .with_adjustment(|x| THETA[x[0] as usize])
    }

    fn gaussian_step() -> StepSpec<f64, impl TransitionEstimator<f64, Aux = ()> + Clone> {
        // l(x, x') = q(x, x') g(x'), q = N(0.8 x, 1), g(x') = N(1.0; x', 0.5)
        let est = exact_wrap(|x: &[f64], y: &[f64]| {
            normal_density(y[0], 0.8 * x[0], 1.0) * normal_density(1.0, y[0], 0.5)
        });
        StepSpec::new(
            est,
            |x: &[f64], out: &mut [f64], rng: &mut StreamRng| out[0] = 0.8 * x[0] + standard_normal::<f64, _>(rng),
            |x: &[f64], y: &[f64]| normal_density(y[0], 0.8 * x[0], 1.0),
        )
    }

    #[test]
    fn single_particle_forced_ancestor() {
        let cloud = ParticleCloud::new(1, vec![0.3], vec![2.0], vec![0.0], 0).unwrap();
        let step = gaussian_step();
        for seed in 0..20 {
            let out = fs_update(&cloud, &step, RngStream::new(seed)).unwrap();
            assert_eq!(out.ancestors, vec![0]);
            let y = out.particle(0)[0];
            let want = normal_density(y, 0.24, 1.0) * normal_density(1.0, y, 0.5) / normal_density(y, 0.24, 1.0);
            assert!((out.weights[0] - want).abs() < 1e-14);
            let pm = pmfs_update(&cloud, &step, RngStream::new(seed)).unwrap();
            assert_eq!(pm.ancestors, vec![0]);
        }
    }

    #[test]
    fn bootstrap_weights_are_the_likelihood() {
        let cloud = ParticleCloud::new(1, vec![-1.0, 0.0, 2.0], vec![1.0, 0.5, 3.0], vec![0.0; 3], 4).unwrap();
        let out = fs_update(&cloud, &gaussian_step(), RngStream::new(3)).unwrap();
        for i in 0..3 {
            let g = normal_density(1.0, out.particle(i)[0], 0.5);
            assert!((out.weights[i] - g).abs() < 1e-14);
        }
        assert!(out.aux.is_empty());
    }

    #[test]
    fn exact_wrapper_makes_both_modes_identical() {
        let cloud = ParticleCloud::new(1, vec![-1.0, 0.0, 2.0, 0.7], vec![1.0, 0.5, 3.0, 0.1], vec![0.0; 4], 2).unwrap();
        let step = gaussian_step();
        let a = fs_update(&cloud, &step, RngStream::new(10)).unwrap();
        let b = pmfs_update(&cloud, &step, RngStream::new(10)).unwrap();
        assert_eq!(a.particles, b.particles);
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.ancestors, b.ancestors);
        assert_eq!(b.aux.len(), 4);
    }

    #[test]
    fn ideal_mode_requires_exact_density() {
        struct Estimated;
        impl TransitionEstimator<f64> for Estimated {
            type Aux = ();
            fn draw_aux(&self, _: &[f64], _: &[f64], _: &mut StreamRng) {}
            fn evaluate(&self, _: &(), _: &[f64], _: &[f64]) -> f64 {
                1.0
            }
        }
        let step = StepSpec::new(Estimated, |x: &[f64], out: &mut [f64], _: &mut StreamRng| out[0] = x[0], |_: &[f64], _: &[f64]| 1.0);
        let cloud = ParticleCloud::new(1, vec![0.0], vec![1.0], vec![0.0], 0).unwrap();
        assert_eq!(fs_update(&cloud, &step, RngStream::new(0)), Err(Error::MissingExactDensity));
        assert!(pmfs_update(&cloud, &step, RngStream::new(0)).is_ok());
    }

    #[test]
    fn invalid_estimates_rejected() {
        struct Bad(f64);
        impl TransitionEstimator<f64> for Bad {
            type Aux = ();
            fn draw_aux(&self, _: &[f64], _: &[f64], _: &mut StreamRng) {}
            fn evaluate(&self, _: &(), _: &[f64], _: &[f64]) -> f64 {
                self.0
            }
        }
        let cloud = ParticleCloud::new(1, vec![0.0], vec![1.0], vec![0.0], 0).unwrap();
        for v in [-1.0, f64::NAN, f64::INFINITY] {
            let step = StepSpec::new(Bad(v), |x: &[f64], out: &mut [f64], _: &mut StreamRng| out[0] = x[0], |_: &[f64], _: &[f64]| 1.0);
            assert!(matches!(pmfs_update(&cloud, &step, RngStream::new(0)), Err(Error::InvalidEstimate { index: 0, .. })));
        }
        let step = StepSpec::new(Bad(0.0), |x: &[f64], out: &mut [f64], _: &mut StreamRng| out[0] = x[0], |_: &[f64], _: &[f64]| 1.0);
        assert!(matches!(pmfs_update(&cloud, &step, RngStream::new(0)), Err(Error::DegenerateWeights { time_index: 1 })));
    }

    #[test]
    fn two_point_estimator_weight_mean() {
        #[derive(Clone)]
        struct TwoPoint;
        impl TransitionEstimator<f64> for TwoPoint {
            type Aux = bool;
            fn draw_aux(&self, _: &[f64], _: &[f64], rng: &mut StreamRng) -> bool {
                rng.random()
            }
            fn evaluate(&self, z: &bool, _: &[f64], _: &[f64]) -> f64 {
                if *z { 0.5 } else { 3.0 }
            }
        }
        let step = StepSpec::new(TwoPoint, |_: &[f64], out: &mut [f64], _: &mut StreamRng| out[0] = 1.0, |_: &[f64], _: &[f64]| 1.0);
        let cloud = ParticleCloud::new(1, vec![0.0], vec![1.0], vec![0.0], 0).unwrap();
        let reps = 100_000;
        let ws: Vec<f64> = (0..reps)
            .map(|r| pmfs_update(&cloud, &step, RngStream::new(r)).unwrap().weights[0])
            .collect();
        let mean = ws.iter().sum::<f64>() / reps as f64;
        let se = (ws.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (reps - 1) as f64 / reps as f64).sqrt();
        assert!((mean - 1.75).abs() < 3.0 * se, "mean {mean} se {se}");
    }

    /// Enumeration oracle: sum_j w_j sum_x' l(x_j, x') f(x') / sum_j w_j theta(x_j).
    fn enumerated_target(states: &[usize], weights: &[f64], f: &[f64; 2]) -> f64 {
        let num: f64 = states.iter().zip(weights).map(|(&s, &w)| w * (0..2).map(|y| L[s][y] * f[y]).sum::<f64>()).sum();
        let den: f64 = states.iter().zip(weights).map(|(&s, &w)| w * THETA[s]).sum();
        num / den
    }

    #[test]
    fn weighted_sum_is_conditionally_unbiased() {
        let f = [1.5, -2.0];
        for (states, weights) in [(vec![0usize, 1], vec![1.0, 2.0]), (vec![1, 1, 0], vec![0.2, 1.0, 3.0])] {
            let n = states.len();
            let values: Vec<f64> = states.iter().map(|&s| s as f64).collect();
            let cloud = ParticleCloud::new(1, values, weights.clone(), vec![0.0; n], 0).unwrap();
            let step = two_state_step();
            let reps = 100_000u64;
            let xs: Vec<f64> = (0..reps)
                .map(|r| {
                    let out = fs_update(&cloud, &step, RngStream::new(r)).unwrap();
                    (0..n).map(|i| out.weights[i] * f[out.particle(i)[0] as usize]).sum::<f64>() / n as f64
                })
                .collect();
            let mean = xs.iter().sum::<f64>() / reps as f64;
            let se = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64 / reps as f64).sqrt();
            let want = enumerated_target(&states, &weights, &f);
            assert!((mean - want).abs() < 3.0 * se, "mean {mean} want {want} se {se}");
        }
    }

    #[test]
    fn ancestor_frequencies_follow_adjusted_weights() {
        let states = [0.0, 1.0, 1.0, 0.0];
        let weights = [1.0, 0.5, 2.0, 0.25];
        let cloud = ParticleCloud::new(1, states.to_vec(), weights.to_vec(), vec![0.0; 4], 0).unwrap();
        let step = two_state_step();
        let mut counts = [0usize; 4];
        let reps = 25_000u64;
        for r in 0..reps {
            for a in fs_update(&cloud, &step, RngStream::new(r)).unwrap().ancestors {
                counts[a] += 1;
            }
        }
        let adjusted: Vec<f64> = (0..4).map(|l| weights[l] * THETA[states[l] as usize]).collect();
        let total: f64 = adjusted.iter().sum();
        let draws = (reps * 4) as f64;
        let chi2: f64 = (0..4).map(|l| {
            let e = draws * adjusted[l] / total;
            (counts[l] as f64 - e).powi(2) / e
        }).sum();
        // chi-square(3) upper 0.001 quantile
        assert!(chi2 < 16.266, "chi2 {chi2} counts {counts:?}");
    }
}
