//! The OU observation model as a particle model, and data simulation.

use std::sync::Arc;

use pmparis::model::{ModelStep, PathModel, TransitionEstimator};
use pmparis::oracles::{ou_exact_transition, LgssSpec};
use pmparis::samplers::{normal_density, purpose, standard_normal, RngStream, StreamRng};
use pmparis::{Error, Result};

use crate::config::Proposal;

/// Clipping applied to the state before it enters the observation mean.
pub const PHI_CLIP: f64 = 1e5;

pub fn phi(x: f64) -> f64 {
    x.clamp(-PHI_CLIP, PHI_CLIP)
}

/// Gaussian `p(x' | x, y_next)` proportional to `q(x, x') g(x', y_next)`, as (mean, variance).
pub fn optimal_proposal_lgss(model: &LgssSpec<f64>, x: f64, y_next: f64) -> (f64, f64) {
    let precision = 1.0 / model.q + model.c * model.c / model.r;
    let var = 1.0 / precision;
    let mean = var * ((model.a * x + model.b) / model.q + model.c * (y_next - model.d) / model.r);
    (mean, var)
}

/// Hidden states `x_0..x_n` and observations `y_1..y_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub states: Vec<f64>,
    pub observations: Vec<f64>,
}

/// Simulates the OU chain at spacing `delta` from `N(0, 1)` with observations
/// `y_k = (1 - eps_true) phi(x_k) + N(0, 1)`.
pub fn simulate_ou_dataset(theta: f64, delta: f64, eps_true: f64, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("dataset needs at least one observation".into()));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument("delta must be positive".into()));
    }
    let mut rng = RngStream::new(seed).rng_at(0, 0, purpose::DATA);
    let mut x: f64 = standard_normal(&mut rng);
    let mut states = Vec::with_capacity(n + 1);
    let mut observations = Vec::with_capacity(n);
    states.push(x);
    for _ in 0..n {
        let (m, v) = ou_exact_transition(theta, delta, x);
        x = m + v.sqrt() * standard_normal::<f64, _>(&mut rng);
        states.push(x);
        observations.push((1.0 - eps_true) * phi(x) + standard_normal::<f64, _>(&mut rng));
    }
    Ok(Dataset { states, observations })
}

/// Linear-Gaussian particle model with exact transition density, targeting
/// `E[sum_{k=0}^n x_k | y_1..y_n]`.
#[derive(Debug, Clone)]
pub struct LgssParticleModel {
    spec: LgssSpec<f64>,
    observations: Arc<Vec<f64>>,
    proposal: Proposal,
}

impl LgssParticleModel {
    pub fn new(spec: LgssSpec<f64>, observations: Arc<Vec<f64>>, proposal: Proposal) -> Result<Self> {
        spec.validate()?;
        Ok(LgssParticleModel { spec, observations, proposal })
    }

    pub fn spec(&self) -> &LgssSpec<f64> {
        &self.spec
    }
}

impl PathModel<f64> for LgssParticleModel {
    type Step = LgssStep;

    fn state_dim(&self) -> usize {
        1
    }

    fn sample_initial(&self, out: &mut [f64], rng: &mut StreamRng) {
        out[0] = self.spec.m0 + self.spec.p0.sqrt() * standard_normal::<f64, _>(rng);
    }

    fn step(&self, n: usize) -> Result<LgssStep> {
        let y = *self
            .observations
            .get(n)
            .ok_or_else(|| Error::InvalidArgument(format!("no observation for step {}", n + 1)))?;
        Ok(LgssStep { spec: self.spec, y, first: n == 0, proposal: self.proposal })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LgssStep {
    spec: LgssSpec<f64>,
    y: f64,
    first: bool,
    proposal: Proposal,
}

impl LgssStep {
    fn emission(&self, x_next: f64) -> f64 {
        normal_density(self.y, self.spec.c * phi(x_next) + self.spec.d, self.spec.r)
    }

    fn kernel(&self, x: f64) -> (f64, f64) {
        match self.proposal {
            Proposal::Optimal => optimal_proposal_lgss(&self.spec, x, self.y),
            Proposal::Bootstrap => self.spec.transition(x),
        }
    }
}

impl TransitionEstimator<f64> for LgssStep {
    type Aux = ();

    fn draw_aux(&self, _x: &[f64], _x_next: &[f64], _rng: &mut StreamRng) {}

    fn evaluate(&self, _aux: &(), x: &[f64], x_next: &[f64]) -> f64 {
        let (m, v) = self.spec.transition(x[0]);
        normal_density(x_next[0], m, v) * self.emission(x_next[0])
    }

    fn exact_density(&self, x: &[f64], x_next: &[f64]) -> Option<f64> {
        Some(self.evaluate(&(), x, x_next))
    }

    fn bound(&self, x_next: &[f64]) -> Option<f64> {
        Some(self.emission(x_next[0]) / (2.0 * std::f64::consts::PI * self.spec.q).sqrt())
    }
}

impl ModelStep<f64> for LgssStep {
    type Estimator = Self;

    fn adjustment(&self, x: &[f64]) -> f64 {
        match self.proposal {
            // predictive likelihood of y given x
            Proposal::Optimal => {
                let s = &self.spec;
                normal_density(self.y, s.c * (s.a * x[0] + s.b) + s.d, s.c * s.c * s.q + s.r)
            }
            Proposal::Bootstrap => 1.0,
        }
    }

    fn sample_proposal(&self, x: &[f64], out: &mut [f64], rng: &mut StreamRng) {
        let (m, v) = self.kernel(x[0]);
        out[0] = m + v.sqrt() * standard_normal::<f64, _>(rng);
    }

    fn proposal_density(&self, x: &[f64], x_next: &[f64]) -> f64 {
        let (m, v) = self.kernel(x[0]);
        normal_density(x_next[0], m, v)
    }

    fn estimator(&self) -> &Self {
        self
    }

    fn increment(&self, x: &[f64], x_next: &[f64]) -> f64 {
        if self.first {
            x[0] + x_next[0]
        } else {
            x_next[0]
        }
    }
}
