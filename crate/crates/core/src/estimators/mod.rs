//! Concrete transition-density estimators.

mod abc;
mod durham_gallant;
mod exact;

pub use abc::{abc_estimator, AbcConfig, AbcEstimator, AbcKernel};
pub use durham_gallant::{
    durham_gallant, euler_density, euler_log_density, DgConfig, DurhamGallant, OrnsteinUhlenbeck, Sde, SdeSpec,
};
pub use exact::{exact_wrap, exact_wrap_bounded, ExactEstimator};
