use crate::model::TransitionEstimator;
use crate::samplers::StreamRng;
use crate::Scalar;

/// Zero-variance estimator returning a known density.
#[derive(Clone)]
pub struct ExactEstimator<F, B> {
    density: F,
    bound: Option<B>,
}

pub fn exact_wrap<T, F>(density: F) -> ExactEstimator<F, fn(&[T]) -> T>
where
    T: Scalar,
    F: Fn(&[T], &[T]) -> T + Send + Sync,
{
    ExactEstimator { density, bound: None }
}

pub fn exact_wrap_bounded<T, F, B>(density: F, bound: B) -> ExactEstimator<F, B>
where
    T: Scalar,
    F: Fn(&[T], &[T]) -> T + Send + Sync,
    B: Fn(&[T]) -> T + Send + Sync,
{
    ExactEstimator { density, bound: Some(bound) }
}

impl<T, F, B> TransitionEstimator<T> for ExactEstimator<F, B>
where
    T: Scalar,
    F: Fn(&[T], &[T]) -> T + Send + Sync,
    B: Fn(&[T]) -> T + Send + Sync,
{
    type Aux = ();

    fn draw_aux(&self, _x: &[T], _x_next: &[T], _rng: &mut StreamRng) {}

    fn evaluate(&self, _aux: &(), x: &[T], x_next: &[T]) -> T {
        (self.density)(x, x_next)
    }

    fn exact_density(&self, x: &[T], x_next: &[T]) -> Option<T> {
        Some((self.density)(x, x_next))
    }

    fn bound(&self, x_next: &[T]) -> Option<T> {
        self.bound.as_ref().map(|b| b(x_next))
    }
}
