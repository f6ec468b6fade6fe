//! Replicate summaries used by the checks.

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn sample_var(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Standard error of the mean.
pub fn std_err(xs: &[f64]) -> f64 {
    (sample_var(xs) / xs.len() as f64).sqrt()
}

/// Least-squares slope of `y ~ beta x` and the relative residual `|y - beta x| / |y|`.
pub fn fit_through_origin(x: &[f64], y: &[f64]) -> (f64, f64) {
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let beta = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let res: f64 = x.iter().zip(y).map(|(a, b)| (b - beta * a).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = y.iter().map(|b| b * b).sum::<f64>().sqrt();
    (beta, if norm > 0.0 { res / norm } else { 0.0 })
}

/// Largest drop `y[i] - y[j]` over `i < j`.
pub fn max_drop(y: &[f64]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut drop = 0.0f64;
    for &v in y {
        peak = peak.max(v);
        drop = drop.max(peak - v);
    }
    drop
}
