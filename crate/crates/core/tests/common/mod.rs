#![allow(dead_code)]

use std::sync::Arc;

use pmparis::estimators::exact_wrap_bounded;
use pmparis::oracles::LgssSpec;
use pmparis::samplers::{normal_density, standard_normal};
use pmparis::{ModelSpec, PathModel, StreamRng};
use rand::Rng;

/// Observations `y_1..y_n` simulated from the model itself.
pub fn simulate(m: &LgssSpec<f64>, n: usize, rng: &mut StreamRng) -> Vec<f64> {
    let mut x = m.m0 + m.p0.sqrt() * standard_normal::<f64, _>(rng);
    (0..n)
        .map(|_| {
            x = m.a * x + m.b + m.q.sqrt() * standard_normal::<f64, _>(rng);
            m.c * x + m.d + m.r.sqrt() * standard_normal::<f64, _>(rng)
        })
        .collect()
}

/// Exact-density particle model with the locally optimal proposal and fully
/// adapted adjustment weights. `increment(m, x, x')` is `h_m`.
pub fn lgss_model(
    m: LgssSpec<f64>,
    ys: Vec<f64>,
    increment: impl Fn(usize, f64, f64) -> f64 + Send + Sync + Clone + 'static,
) -> impl PathModel<f64> {
    let ys = Arc::new(ys);
    let init = move |out: &mut [f64], rng: &mut StreamRng| out[0] = m.m0 + m.p0.sqrt() * standard_normal::<f64, _>(rng);
    ModelSpec::new(1, init, move |n: usize| {
        let y = ys[n];
        let prec = 1.0 / m.q + m.c * m.c / m.r;
        let var = 1.0 / prec;
        let mean = move |x: f64| var * ((m.a * x + m.b) / m.q + m.c * (y - m.d) / m.r);
        let g = move |xn: f64| normal_density(y, m.c * xn + m.d, m.r);
        let density = move |x: &[f64], xn: &[f64]| normal_density(xn[0], m.a * x[0] + m.b, m.q) * g(xn[0]);
        let bound = move |xn: &[f64]| g(xn[0]) / (2.0 * std::f64::consts::PI * m.q).sqrt();
        let h = increment.clone();
        pmparis::StepSpec::new(
            exact_wrap_bounded(density, bound),
            move |x: &[f64], out: &mut [f64], rng: &mut StreamRng| out[0] = mean(x[0]) + var.sqrt() * standard_normal::<f64, _>(rng),
            move |x: &[f64], xn: &[f64]| normal_density(xn[0], mean(x[0]), var),
        )
        .with_adjustment(move |x: &[f64]| normal_density(y, m.c * (m.a * x[0] + m.b) + m.d, m.c * m.c * m.q + m.r))
        .with_increment(move |x: &[f64], xn: &[f64]| h(n, x[0], xn[0]))
    })
}

pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

pub fn sample_var(xs: &[f64]) -> f64 {
    let (_, se) = mean_se(xs);
    se * se * xs.len() as f64
}

pub fn random_lgss(rng: &mut StreamRng) -> LgssSpec<f64> {
    let mut u = |lo: f64, hi: f64| rng.random_range(lo..hi);
    LgssSpec { a: u(-0.95, 0.95), b: u(-1.0, 1.0), q: u(0.2, 1.5), c: u(0.5, 1.5), d: u(-1.0, 1.0), r: u(0.3, 1.5), m0: u(-1.0, 1.0), p0: u(0.5, 2.0) }
}
