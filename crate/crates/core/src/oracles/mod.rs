//! Exact reference computations used to validate particle output.

mod finite;
mod lgss;
mod ou;

pub use finite::{FiniteHmm, FiniteStep};
pub use lgss::{joint_gaussian_condition, kalman_smooth_additive, LgssSpec, SmoothedMoments};
pub use ou::{ou_euler_transition, ou_exact_transition};
