//! Online PaRIS recursion: forward sampling followed by backward sampling at
//! every step, keeping only the current cloud alive.

use crate::backward::{bs_update, BackwardConfig};
use crate::forward::forward_update;
use crate::model::{init_cloud, ModelStep, ParticleCloud, PathModel};
use crate::samplers::RngStream;
use crate::{Error, Result, Scalar};

/// Whether transition densities are evaluated exactly or estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DensityMode {
    Ideal,
    #[default]
    PseudoMarginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParisConfig {
    pub particles: usize,
    pub backward: BackwardConfig,
    pub seed: u64,
    pub mode: DensityMode,
    /// Record an estimate every `record_every` steps (the final step is always recorded).
    pub record_every: usize,
}

impl ParisConfig {
    pub fn new(particles: usize, seed: u64) -> Self {
        ParisConfig {
            particles,
            backward: BackwardConfig::default(),
            seed,
            mode: DensityMode::PseudoMarginal,
            record_every: 1,
        }
    }

    pub fn with_backward(mut self, backward: BackwardConfig) -> Self {
        self.backward = backward;
        self
    }

    pub fn with_mode(mut self, mode: DensityMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_record_every(mut self, every: usize) -> Self {
        self.record_every = every;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(Error::invalid("particle count must be at least 1"));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every must be at least 1"));
        }
        self.backward.validate()
    }

    fn stream(&self) -> RngStream {
        RngStream::new(self.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateRecord<T> {
    pub time_index: usize,
    pub estimate: T,
    pub ess: T,
    pub weight_cv: T,
}

impl<T: Scalar> EstimateRecord<T> {
    pub fn from_cloud(cloud: &ParticleCloud<T>) -> Self {
        EstimateRecord {
            time_index: cloud.time_index(),
            estimate: cloud.smoothing_estimate(),
            ess: cloud.ess(),
            weight_cv: cloud.weight_cv(),
        }
    }
}

/// One full update `(xi_n, w_n, tau_n) -> (xi_{n+1}, w_{n+1}, tau_{n+1})` with the given step.
pub fn paris_step_with<T, S>(cloud: &ParticleCloud<T>, step: &S, config: &ParisConfig) -> Result<ParticleCloud<T>>
where
    T: Scalar,
    S: ModelStep<T>,
{
    let stream = config.stream();
    let outcome = forward_update(cloud, step, stream, config.mode)?;
    let stats = bs_update(cloud, &outcome, step, &config.backward, config.mode, stream)?;
    ParticleCloud::new(cloud.dim(), outcome.particles, outcome.weights, stats, cloud.time_index() + 1)
}

/// [`paris_step_with`] using the model's step at the cloud's time index.
pub fn paris_step<T, M>(cloud: &ParticleCloud<T>, model: &M, config: &ParisConfig) -> Result<ParticleCloud<T>>
where
    T: Scalar,
    M: PathModel<T> + ?Sized,
{
    let step = model.step(cloud.time_index())?;
    paris_step_with(cloud, &step, config)
}

/// Runs `n_steps` updates from a fresh cloud, calling `visit` on the initial
/// cloud and after every step. Returns the final cloud.
pub fn run_online_with<T, M, F>(model: &M, n_steps: usize, config: &ParisConfig, mut visit: F) -> Result<ParticleCloud<T>>
where
    T: Scalar,
    M: PathModel<T> + ?Sized,
    F: FnMut(&ParticleCloud<T>),
{
    config.validate()?;
    let at = |step: usize| move |e: Error| Error::AtStep { step, source: Box::new(e) };
    let mut cloud = init_cloud(model, config.particles, config.stream()).map_err(at(0))?;
    visit(&cloud);
    for n in 0..n_steps {
        cloud = paris_step(&cloud, model, config).map_err(at(n + 1))?;
        visit(&cloud);
    }
    Ok(cloud)
}

/// Runs the smoother online and returns the recorded estimates.
pub fn run_online<T, M>(model: &M, n_steps: usize, config: &ParisConfig) -> Result<Vec<EstimateRecord<T>>>
where
    T: Scalar,
    M: PathModel<T> + ?Sized,
{
    let every = config.record_every.max(1);
    let mut records = Vec::with_capacity(n_steps / every + 2);
    run_online_with(model, n_steps, config, |cloud| {
        let n = cloud.time_index();
        if n % every == 0 || n == n_steps {
            records.push(EstimateRecord::from_cloud(cloud));
        }
    })?;
    Ok(records)
}
