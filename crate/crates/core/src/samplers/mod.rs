//! Random-number plumbing and the elementary samplers shared by the forward
//! and backward updates and the Durham–Gallant estimator.

mod bridge;
mod categorical;
mod gaussian;
mod rng;

pub use bridge::{bridge_density, bridge_log_density, bridge_sample, BridgePath};
pub use categorical::{categorical, Categorical};
pub use gaussian::{log_normal_density, normal_density, standard_normal};
pub use rng::{derive_seed, purpose, RngStream, StreamRng};
