use crate::Scalar;

/// Mean and variance of `X_delta | X_0 = x` for `dX = -(X - theta) dt + dW`.
pub fn ou_exact_transition<T: Scalar>(theta: T, delta: T, x: T) -> (T, T) {
    let decay = (-delta).exp();
    let var = (T::one() - (-T::of(2.0) * delta).exp()) / T::of(2.0);
    (theta + (x - theta) * decay, var)
}

/// Mean and variance of `K` composed Euler steps of size `delta / K` for the
/// same process (the law the Durham–Gallant estimator is unbiased for).
pub fn ou_euler_transition<T: Scalar>(theta: T, delta: T, substeps: usize, x: T) -> (T, T) {
    let h = delta / T::of_usize(substeps);
    let rho = T::one() - h;
    let k = substeps as i32;
    let var = if rho.abs() == T::one() {
        h * T::of_usize(substeps)
    } else {
        h * (T::one() - rho.powi(2 * k)) / (T::one() - rho * rho)
    };
    (theta + (x - theta) * rho.powi(k), var)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_point_of_mean_reversion() {
        for d in [0.1, 1.0, 7.0] {
            assert_eq!(ou_exact_transition(5.0, d, 5.0).0, 5.0);
        }
    }

    #[test]
    fn long_horizon_reaches_stationary_law() {
        let (m, v) = ou_exact_transition(5.0f64, 50.0, -3.0);
        assert!((m - 5.0).abs() < 1e-10);
        assert!((v - 0.5).abs() < 1e-10);
    }

    #[test]
    fn closed_form_values() {
        let (m, v) = ou_exact_transition(5.0f64, 1.0, 6.0);
        assert!((m - 5.367_879_441_171_442).abs() < 1e-12);
        assert!((v - 0.432_332_358_381_693_6).abs() < 1e-12);
    }

    #[test]
    fn euler_composition_matches_step_recursion() {
        for k in [1usize, 2, 4, 32] {
            let h = 1.0 / k as f64;
            let (mut m, mut v) = (6.5, 0.0);
            for _ in 0..k {
                m += h * (5.0 - m);
                v = (1.0 - h) * (1.0 - h) * v + h;
            }
            let (cm, cv) = ou_euler_transition(5.0, 1.0, k, 6.5);
            assert!((cm - m).abs() < 1e-12 && (cv - v).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn euler_composition_converges_to_exact() {
        let (em, ev) = ou_exact_transition(5.0f64, 1.0, 6.0);
        let err = |k| {
            let (m, v) = ou_euler_transition(5.0f64, 1.0, k, 6.0);
            (m - em).abs() + (v - ev).abs()
        };
        assert!(err(1024) < err(32) && err(32) < err(2));
        assert!(err(1024) < 1e-3);
    }
}
