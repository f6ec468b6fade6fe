//! Scalar linear-Gaussian state-space model
//! `x_{k+1} = a x_k + b + N(0, q)`, `y_k = c x_k + d + N(0, r)` for `k >= 1`,
//! `x_0 ~ N(m0, p0)` unobserved.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result, Scalar};

use super::ou::{ou_euler_transition, ou_exact_transition};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LgssSpec<T> {
    pub a: T,
    pub b: T,
    pub q: T,
    pub c: T,
    pub d: T,
    pub r: T,
    pub m0: T,
    pub p0: T,
}

impl<T: Scalar> LgssSpec<T> {
    /// OU process with mean `theta` sampled every `delta`, observed as
    /// `(1 - eps) x + N(0, 1)`, started from `N(0, 1)`.
    pub fn ou(theta: T, delta: T, eps: T) -> Self {
        let (b_plus_a_theta, q) = ou_exact_transition(theta, delta, T::zero());
        Self::ou_like((-delta).exp(), b_plus_a_theta, q, eps)
    }

    /// As [`ou`](Self::ou) but with the `K`-fold Euler transition in place of the exact one.
    pub fn ou_euler(theta: T, delta: T, substeps: usize, eps: T) -> Self {
        let (b, q) = ou_euler_transition(theta, delta, substeps, T::zero());
        let a = (T::one() - delta / T::of_usize(substeps)).powi(substeps as i32);
        Self::ou_like(a, b, q, eps)
    }

    fn ou_like(a: T, b: T, q: T, eps: T) -> Self {
        LgssSpec { a, b, q, c: T::one() - eps, d: T::zero(), r: T::one(), m0: T::zero(), p0: T::one() }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [self.a, self.b, self.q, self.c, self.d, self.r, self.m0, self.p0];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("LGSS parameters must be finite"));
        }
        if !(self.q > T::zero() && self.r > T::zero() && self.p0 > T::zero()) {
            return Err(Error::invalid("LGSS variances q, r, p0 must be positive"));
        }
        Ok(())
    }

    /// Mean and variance of `x_{k+1} | x_k = x`.
    pub fn transition(&self, x: T) -> (T, T) {
        (self.a * x + self.b, self.q)
    }

    /// Mean and variance of `y | x`.
    pub fn emission(&self, x: T) -> (T, T) {
        (self.c * x + self.d, self.r)
    }
}

/// Posterior marginals of `x_0, ..., x_n` given `y_1, ..., y_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedMoments<T> {
    pub means: Vec<T>,
    pub variances: Vec<T>,
}

impl<T: Scalar> SmoothedMoments<T> {
    /// `E[sum_k x_k | y]`.
    pub fn sum(&self) -> T {
        self.means.iter().copied().sum()
    }
}

/// Kalman filter followed by the Rauch–Tung–Striebel backward pass.
pub fn kalman_smooth_additive<T: Scalar>(model: &LgssSpec<T>, observations: &[T]) -> Result<SmoothedMoments<T>> {
    model.validate()?;
    if observations.is_empty() {
        return Err(Error::invalid("at least one observation is required"));
    }
    let n = observations.len();
    let mut filt_m = Vec::with_capacity(n + 1);
    let mut filt_p = Vec::with_capacity(n + 1);
    let mut pred_m = Vec::with_capacity(n + 1);
    let mut pred_p = Vec::with_capacity(n + 1);
    filt_m.push(model.m0);
    filt_p.push(model.p0);
    pred_m.push(model.m0);
    pred_p.push(model.p0);
    for &y in observations {
        let (m, p) = (filt_m[filt_m.len() - 1], filt_p[filt_p.len() - 1]);
        let mp = model.a * m + model.b;
        let pp = model.a * model.a * p + model.q;
        let s = model.c * model.c * pp + model.r;
        let gain = pp * model.c / s;
        pred_m.push(mp);
        pred_p.push(pp);
        filt_m.push(mp + gain * (y - model.c * mp - model.d));
        filt_p.push((T::one() - gain * model.c) * pp);
    }
    let mut means = filt_m.clone();
    let mut variances = filt_p.clone();
    for k in (0..n).rev() {
        let g = filt_p[k] * model.a / pred_p[k + 1];
        means[k] = filt_m[k] + g * (means[k + 1] - pred_m[k + 1]);
        variances[k] = filt_p[k] + g * g * (variances[k + 1] - pred_p[k + 1]);
    }
    Ok(SmoothedMoments { means, variances })
}

const MAX_JOINT_STEPS: usize = 50;

/// Posterior marginals by assembling the full joint covariance of
/// `(x_{0:n}, y_{1:n})` and conditioning with a dense Cholesky solve.
pub fn joint_gaussian_condition(model: &LgssSpec<f64>, observations: &[f64]) -> Result<SmoothedMoments<f64>> {
    model.validate()?;
    let n = observations.len();
    if n == 0 || n > MAX_JOINT_STEPS {
        return Err(Error::invalid(format!("joint conditioning needs 1..={MAX_JOINT_STEPS} observations, got {n}")));
    }
    let mut mean_x = vec![model.m0; n + 1];
    let mut var_x = vec![model.p0; n + 1];
    for k in 1..=n {
        mean_x[k] = model.a * mean_x[k - 1] + model.b;
        var_x[k] = model.a * model.a * var_x[k - 1] + model.q;
    }
    let cov_x = DMatrix::from_fn(n + 1, n + 1, |i, j| {
        let (lo, hi) = (i.min(j), i.max(j));
        model.a.powi((hi - lo) as i32) * var_x[lo]
    });
    // y_k observes x_k for k = 1..n
    let cov_xy = DMatrix::from_fn(n + 1, n, |i, j| model.c * cov_x[(i, j + 1)]);
    let cov_yy = DMatrix::from_fn(n, n, |i, j| {
        model.c * model.c * cov_x[(i + 1, j + 1)] + if i == j { model.r } else { 0.0 }
    });
    let resid = DVector::from_fn(n, |j, _| observations[j] - model.c * mean_x[j + 1] - model.d);
    let chol = cov_yy.cholesky().ok_or(Error::NotPositiveDefinite)?;
    let shift = &cov_xy * chol.solve(&resid);
    let reduction = &cov_xy * chol.solve(&cov_xy.transpose());
    let means = (0..=n).map(|i| mean_x[i] + shift[i]).collect();
    let variances = (0..=n).map(|i| cov_x[(i, i)] - reduction[(i, i)]).collect();
    Ok(SmoothedMoments { means, variances })
}
