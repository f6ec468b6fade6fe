use std::sync::Arc;

use pmparis::driver::run_online_with;
use pmparis::oracles::FiniteHmm;
use pmparis::samplers::derive_seed;
use pmparis::{BackwardConfig, DensityMode, ParisConfig};

fn replicate_estimates(hmm: &Arc<FiniteHmm<f64>>, n: usize, cfg: ParisConfig, reps: u64) -> Vec<f64> {
    (0..reps)
        .map(|r| {
            let c = ParisConfig { seed: derive_seed(cfg.seed, r), ..cfg };
            run_online_with(hmm, n, &c, |_| {}).unwrap().smoothing_estimate()
        })
        .collect()
}

fn check(backward: BackwardConfig, mode: DensityMode, seed: u64) {
    let hmm = Arc::new(FiniteHmm::<f64>::random(3, 10, 42).unwrap());
    let exact = hmm.exact_additive_smoothing(10).unwrap();
    let cfg = ParisConfig::new(1000, seed).with_backward(backward).with_mode(mode);
    let xs = replicate_estimates(&hmm, 10, cfg, 30);
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let se = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    assert!((mean - exact).abs() < 3.0 * se, "mean {mean} exact {exact} se {se}");
}

#[test]
fn ideal_rejection_matches_exact_smoothing() {
    check(BackwardConfig::rejection(2), DensityMode::Ideal, 1);
}

#[test]
fn pseudo_marginal_mh_matches_exact_smoothing() {
    check(BackwardConfig::independent_mh(2, 5), DensityMode::PseudoMarginal, 2);
}

#[test]
fn horizon_beyond_model_is_reported() {
    let hmm = Arc::new(FiniteHmm::<f64>::random(2, 3, 0).unwrap());
    let err = run_online_with(&hmm, 4, &ParisConfig::new(10, 0), |_| {}).unwrap_err();
    assert!(matches!(err, pmparis::Error::AtStep { step: 4, .. }), "{err:?}");
}
