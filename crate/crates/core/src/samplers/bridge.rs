use rand::Rng;

use super::gaussian::{log_normal_density, standard_normal};
use crate::{Error, Result, Scalar};

/// Discretised Brownian-bridge path between two fixed endpoints.
///
/// `point(0)` is the start, `point(substeps)` the pinned end and the
/// `substeps - 1` interior points are the sampled part of the path.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgePath<T> {
    dim: usize,
    start: Vec<T>,
    end: Vec<T>,
    interior: Vec<T>,
    step: T,
    substeps: usize,
}

impl<T: Scalar> BridgePath<T> {
    /// Assembles a path from explicit parts; `interior` is row-major with
    /// `substeps - 1` rows of `start.len()` coordinates.
    pub fn from_parts(start: Vec<T>, end: Vec<T>, interior: Vec<T>, step: T, substeps: usize) -> Result<Self> {
        if substeps == 0 {
            return Err(Error::invalid("bridge needs at least one substep"));
        }
        if start.len() != end.len() || start.is_empty() {
            return Err(Error::invalid("bridge endpoints must share a positive dimension"));
        }
        let dim = start.len();
        if interior.len() != (substeps - 1) * dim {
            return Err(Error::invalid(format!(
                "bridge interior has {} values, expected {}",
                interior.len(),
                (substeps - 1) * dim
            )));
        }
        if !(step >= T::zero()) || !step.is_finite() {
            return Err(Error::invalid("bridge step must be finite and nonnegative"));
        }
        Ok(BridgePath { dim, start, end, interior, step, substeps })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    pub fn step(&self) -> T {
        self.step
    }

    pub fn interior(&self) -> &[T] {
        &self.interior
    }

    /// Point `k` of the full path `z_0 = start, ..., z_K = end`.
    pub fn point(&self, k: usize) -> &[T] {
        assert!(k <= self.substeps, "bridge point {k} out of range");
        if k == 0 {
            &self.start
        } else if k == self.substeps {
            &self.end
        } else {
            &self.interior[(k - 1) * self.dim..k * self.dim]
        }
    }
}

/// Mean and variance of `z_{j+1} | z_j` for the bridge pinned at `end` after `substeps`.
#[inline]
fn bridge_step_moments<T: Scalar>(z: T, end: T, j: usize, substeps: usize, step: T) -> (T, T) {
    let remaining = T::of_usize(substeps - j);
    let mean = z + (end - z) / remaining;
    let var = step * (remaining - T::one()) / remaining;
    (mean, var)
}

/// Samples a Brownian bridge from `start` to `end` over `substeps` steps of size `step`.
pub fn bridge_sample<T: Scalar, R: Rng + ?Sized>(
    start: &[T],
    end: &[T],
    substeps: usize,
    step: T,
    rng: &mut R,
) -> Result<BridgePath<T>> {
    if substeps == 0 {
        return Err(Error::invalid("bridge needs at least one substep"));
    }
    if !(step > T::zero()) || !step.is_finite() {
        return Err(Error::invalid("bridge step must be positive and finite"));
    }
    let dim = start.len();
    let mut interior = Vec::with_capacity((substeps - 1) * dim);
    let mut current = start.to_vec();
    for j in 0..substeps - 1 {
        for d in 0..dim {
            let (mean, var) = bridge_step_moments(current[d], end[d], j, substeps, step);
            current[d] = mean + var.sqrt() * standard_normal::<T, _>(rng);
        }
        interior.extend_from_slice(&current);
    }
    BridgePath::from_parts(start.to_vec(), end.to_vec(), interior, step, substeps)
}

/// Log-density of the interior of `path` under the sequential bridge law.
pub fn bridge_log_density<T: Scalar>(path: &BridgePath<T>) -> Result<T> {
    let mut log_density = T::zero();
    let end = path.point(path.substeps);
    // the final transition onto the pinned end is deterministic and carries no density
    for j in 0..path.substeps.saturating_sub(1) {
        let from = path.point(j);
        let to = path.point(j + 1);
        for d in 0..path.dim {
            let (mean, var) = bridge_step_moments(from[d], end[d], j, path.substeps, path.step);
            if var > T::zero() {
                log_density = log_density + log_normal_density(to[d], mean, var);
            } else if to[d] != mean {
                return Err(Error::DegenerateBridge { step: j + 1 });
            }
        }
    }
    Ok(log_density)
}

pub fn bridge_density<T: Scalar>(path: &BridgePath<T>) -> Result<T> {
    Ok(bridge_log_density(path)?.exp())
}
