//! The experiments: skew-model bias studies on the OU model and oracle
//! agreement checks. Each returns its CSV rows and pass/fail checks.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use pmparis::driver::run_online;
use pmparis::estimators::{durham_gallant, DgConfig, DurhamGallant, OrnsteinUhlenbeck};
use pmparis::oracles::{
    joint_gaussian_condition, kalman_smooth_additive, ou_euler_transition, ou_exact_transition, FiniteHmm, LgssSpec,
};
use pmparis::samplers::{derive_seed, normal_density, standard_normal, RngStream};
use pmparis::{DensityMode, EstimateRecord64, ModelSpec, ParisConfig, PathModel, StepSpec, StreamRng};

use crate::config::{Experiment, ExperimentConfig};
use crate::model::{optimal_proposal_lgss, phi, simulate_ou_dataset, LgssParticleModel};
use crate::report::{Check, Report, ResultRow};
use crate::stats::{fit_through_origin, max_drop, mean, sample_var, std_err};
use crate::Error;

/// Points `(x, x')` at which the Durham–Gallant estimator is checked.
pub const DG_POINTS: [(f64, f64); 5] = [(5.0, 5.3), (4.5, 5.0), (5.5, 5.2), (5.0, 4.6), (6.0, 5.5)];
pub const DG_DRAWS: usize = 100_000;

/// Runs the experiment named in `cfg`.
pub fn run(cfg: &ExperimentConfig) -> Result<Report, Error> {
    cfg.validate()?;
    match cfg.experiment {
        Experiment::FigureA => figure_a(cfg),
        Experiment::FigureB => figure_b(cfg),
        Experiment::OracleHmm => oracle_hmm(cfg),
        Experiment::OracleLgss => oracle_lgss(cfg),
        Experiment::DgCheck => dg_check(cfg),
    }
}

fn paris_config(cfg: &ExperimentConfig, particles: usize, mode: DensityMode) -> ParisConfig {
    ParisConfig::new(particles, cfg.seed).with_backward(cfg.backward_config()).with_mode(mode)
}

/// Independent replicate runs; replicate `r` is seeded with `derive_seed(series, r)`.
fn replicate_runs<M>(model: &M, steps: usize, base: &ParisConfig, series: u64, reps: usize) -> Result<Vec<Vec<EstimateRecord64>>, Error>
where
    M: PathModel<f64> + Sync,
{
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let c = ParisConfig { seed: derive_seed(series, r as u64), ..*base };
            run_online(model, steps, &c).map_err(Error::from)
        })
        .collect()
}

/// Running minimum of the ESS along a run.
fn running_ess_min(records: &[EstimateRecord64]) -> Vec<f64> {
    records
        .iter()
        .scan(f64::INFINITY, |m, r| {
            *m = m.min(r.ess);
            Some(*m)
        })
        .collect()
}

fn ess_check(rows: &[ResultRow]) -> Check {
    let min = rows.iter().filter_map(|r| r.ess_min).fold(f64::INFINITY, f64::min);
    Check::new("ess-min-above-one", min > 1.0, "ess_min > 1 on every particle row", &[("ess_min", min)])
}

fn series_seed(cfg: &ExperimentConfig, tag: u64) -> u64 {
    derive_seed(cfg.seed, tag)
}

fn kalman_sum(spec: &LgssSpec<f64>, ys: &[f64]) -> Result<f64, Error> {
    Ok(kalman_smooth_additive(spec, ys)?.sum())
}

/// Bias of the skew model `eps` against the true model, for fixed data, over the grid.
pub fn figure_a(cfg: &ExperimentConfig) -> Result<Report, Error> {
    let data = simulate_ou_dataset(cfg.theta, cfg.delta, 0.0, cfg.n, cfg.seed)?;
    let ys = Arc::new(data.observations);
    let truth = kalman_sum(&LgssSpec::ou(cfg.theta, cfg.delta, 0.0), &ys)?;
    let base = paris_config(cfg, cfg.N, DensityMode::Ideal);

    let mut rows = Vec::new();
    let mut biases = Vec::new();
    let mut worst_z = 0.0f64;
    for (k, &eps) in cfg.eps_grid.iter().enumerate() {
        let spec = LgssSpec::ou(cfg.theta, cfg.delta, eps);
        let skew = kalman_sum(&spec, &ys)?;
        biases.push((skew - truth).abs());
        rows.push(row(cfg, eps, cfg.n, None, "kalman", skew, truth, None));

        let model = LgssParticleModel::new(spec, ys.clone(), cfg.proposal)?;
        let runs = replicate_runs(&model, cfg.n, &base, series_seed(cfg, 1 + k as u64), cfg.replicates)?;
        let finals: Vec<f64> = runs.iter().map(|r| r[r.len() - 1].estimate).collect();
        for (r, run) in runs.iter().enumerate() {
            let ess = running_ess_min(run);
            rows.push(row(cfg, eps, cfg.n, Some(r), "paris", finals[r], truth, Some(ess[ess.len() - 1])));
        }
        worst_z = worst_z.max((mean(&finals) - skew).abs() / std_err(&finals));
    }

    let mut checks = Vec::new();
    if let Some(i) = cfg.eps_grid.iter().position(|&e| e == 0.0) {
        checks.push(Check::new("kalman-bias-zero-at-eps0", biases[i] == 0.0, "bias(0) == 0", &[("bias", biases[i])]));
    }
    let max_bias = biases.iter().copied().fold(0.0, f64::max);
    let drop = max_drop(&biases);
    checks.push(Check::new(
        "kalman-bias-nondecreasing",
        drop <= 0.05 * max_bias,
        "largest decrease <= 5% of max bias",
        &[("max_drop", drop), ("max_bias", max_bias)],
    ));
    let (beta, resid) = fit_through_origin(&cfg.eps_grid, &biases);
    checks.push(Check::new(
        "kalman-bias-linear-in-eps",
        resid < 0.25,
        "relative residual of bias ~ beta*eps < 0.25",
        &[("beta", beta), ("relative_residual", resid)],
    ));
    checks.push(Check::new(
        "paris-brackets-kalman",
        worst_z <= 3.0,
        "|replicate mean - skew Kalman| <= 3 s.e. at every eps",
        &[("max_z", worst_z)],
    ));
    checks.push(ess_check(&rows));
    Ok(Report { experiment: Experiment::FigureA, rows, checks })
}

/// Bias against horizon at fixed skew, with replicate spread under the skew and true models.
pub fn figure_b(cfg: &ExperimentConfig) -> Result<Report, Error> {
    let eps = cfg.fixed_eps;
    let data = simulate_ou_dataset(cfg.theta, cfg.delta, 0.0, cfg.n, cfg.seed)?;
    let ys = Arc::new(data.observations);
    let true_spec = LgssSpec::ou(cfg.theta, cfg.delta, 0.0);
    let skew_spec = LgssSpec::ou(cfg.theta, cfg.delta, eps);

    let mut truth = Vec::with_capacity(cfg.n);
    let mut biases = Vec::with_capacity(cfg.n);
    let mut rows = Vec::new();
    for m in 1..=cfg.n {
        let t = kalman_sum(&true_spec, &ys[..m])?;
        let s = kalman_sum(&skew_spec, &ys[..m])?;
        truth.push(t);
        biases.push((s - t).abs());
        rows.push(row(cfg, eps, m, None, "kalman", s, t, None));
    }

    let base = paris_config(cfg, cfg.N, DensityMode::Ideal);
    let mut finals = Vec::new();
    for (tag, label, spec) in [(1, "paris-skew", skew_spec), (2, "paris-true", true_spec)] {
        let model = LgssParticleModel::new(spec, ys.clone(), cfg.proposal)?;
        let runs = replicate_runs(&model, cfg.n, &base, series_seed(cfg, tag), cfg.replicates)?;
        for (r, run) in runs.iter().enumerate() {
            let ess = running_ess_min(run);
            for m in 1..=cfg.n {
                rows.push(row(cfg, eps, m, Some(r), label, run[m].estimate, truth[m - 1], Some(ess[m])));
            }
        }
        finals.push(runs);
    }
    let at = |runs: &[Vec<EstimateRecord64>], m: usize| runs.iter().map(|r| r[m].estimate).collect::<Vec<f64>>();

    let steps: Vec<f64> = (1..=cfg.n).map(|m| m as f64).collect();
    let (beta, resid) = fit_through_origin(&steps, &biases);
    let mut checks = vec![
        Check::new(
            "kalman-bias-linear-in-n",
            resid < 0.25,
            "relative residual of bias ~ beta*n < 0.25",
            &[("beta", beta), ("relative_residual", resid)],
        ),
        Check::new(
            "kalman-bias-first-below-last",
            biases[0] <= biases[cfg.n - 1],
            "bias(n=1) <= bias(n)",
            &[("bias_first", biases[0]), ("bias_last", biases[cfg.n - 1])],
        ),
    ];
    let true_final: Vec<f64> = at(&finals[1], cfg.n).iter().map(|e| e - truth[cfg.n - 1]).collect();
    let z = mean(&true_final).abs() / std_err(&true_final);
    checks.push(Check::new(
        "true-model-unbiased",
        z <= 3.0,
        "|mean error of true-model replicates at final n| <= 3 s.e.",
        &[("mean_error", mean(&true_final)), ("std_err", std_err(&true_final)), ("z", z)],
    ));
    let early = (cfg.n / 5).max(1);
    let ratio = sample_var(&at(&finals[0], cfg.n)) / sample_var(&at(&finals[0], early));
    checks.push(Check::new(
        "variance-growth-subquadratic",
        ratio < 15.0,
        format!("var(n={}) / var(n={early}) of skew replicates < 15", cfg.n),
        &[("ratio", ratio)],
    ));
    checks.push(ess_check(&rows));
    Ok(Report { experiment: Experiment::FigureB, rows, checks })
}

/// PaRIS on a random three-state model against the exact forward-smoothing value,
/// plus agreement of the exact recursion with path enumeration.
pub fn oracle_hmm(cfg: &ExperimentConfig) -> Result<Report, Error> {
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for s in 1..=3usize {
        for n in 1..=6usize {
            let hmm = FiniteHmm::<f64>::random(s, n, series_seed(cfg, (100 * s + n) as u64))?;
            let exact = hmm.exact_additive_smoothing(n)?;
            let brute = hmm.enumerate_additive_smoothing(n)?;
            worst = worst.max((exact - brute).abs());
            rows.push(row(cfg, 0.0, n, Some(s), "exact-vs-enumeration", exact, brute, None));
        }
    }
    let mut checks = vec![Check::new(
        "exact-matches-enumeration",
        worst <= 1e-10,
        "|forward smoothing - enumeration| <= 1e-10 for S <= 3, n <= 6",
        &[("max_abs_diff", worst)],
    )];

    let hmm = Arc::new(FiniteHmm::<f64>::random(3, cfg.n, cfg.seed)?);
    let exact = hmm.exact_additive_smoothing(cfg.n)?;
    let base = paris_config(cfg, cfg.N, DensityMode::Ideal);
    let runs = replicate_runs(&hmm, cfg.n, &base, series_seed(cfg, 1), cfg.replicates)?;
    let finals: Vec<f64> = runs.iter().map(|r| r[r.len() - 1].estimate).collect();
    for (r, run) in runs.iter().enumerate() {
        let ess = running_ess_min(run);
        rows.push(row(cfg, 0.0, cfg.n, Some(r), "paris", finals[r], exact, Some(ess[ess.len() - 1])));
    }
    let z = (mean(&finals) - exact).abs() / std_err(&finals);
    checks.push(Check::new(
        "paris-matches-exact",
        z <= 3.0,
        "|replicate mean - exact| <= 3 s.e.",
        &[("mean", mean(&finals)), ("exact", exact), ("std_err", std_err(&finals)), ("z", z)],
    ));
    Ok(Report { experiment: Experiment::OracleHmm, rows, checks })
}

/// Random LGSS instance with `n <= 20`, as used by the Kalman cross-check.
pub fn random_lgss(seed: u64) -> (LgssSpec<f64>, Vec<f64>) {
    let mut rng = RngStream::new(seed).rng();
    let mut u = |lo: f64, hi: f64| rng.random_range(lo..hi);
    let spec = LgssSpec {
        a: u(-1.1, 1.1),
        b: u(-1.0, 1.0),
        q: u(0.1, 2.0),
        c: u(-2.0, 2.0),
        d: u(-1.0, 1.0),
        r: u(0.1, 2.0),
        m0: u(-2.0, 2.0),
        p0: u(0.1, 3.0),
    };
    let n = 1 + (u(0.0, 20.0) as usize).min(19);
    let ys = (0..n).map(|_| 3.0 * standard_normal::<f64, _>(&mut rng)).collect();
    (spec, ys)
}

/// Kalman smoother against dense joint conditioning, and the particle-count
/// rate of the PaRIS estimate on the OU model.
pub fn oracle_lgss(cfg: &ExperimentConfig) -> Result<Report, Error> {
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for i in 0..20 {
        let (spec, ys) = random_lgss(series_seed(cfg, 100 + i));
        let k = kalman_smooth_additive(&spec, &ys)?;
        let j = joint_gaussian_condition(&spec, &ys)?;
        for (a, b) in k.means.iter().zip(&j.means) {
            worst = worst.max((a - b).abs());
        }
        rows.push(row(cfg, 0.0, ys.len(), Some(i as usize), "kalman-vs-joint", k.sum(), j.sum(), None));
    }
    let mut checks = vec![Check::new(
        "kalman-matches-joint",
        worst <= 1e-8,
        "max |Kalman - joint conditioning| smoothed mean <= 1e-8 on 20 instances",
        &[("max_abs_diff", worst)],
    )];

    let data = simulate_ou_dataset(cfg.theta, cfg.delta, 0.0, cfg.n, cfg.seed)?;
    let ys = Arc::new(data.observations);
    let spec = LgssSpec::ou(cfg.theta, cfg.delta, 0.0);
    let truth = kalman_sum(&spec, &ys)?;
    let model = LgssParticleModel::new(spec, ys, cfg.proposal)?;
    let mut sds = Vec::new();
    for (tag, particles) in [(1, cfg.N), (2, 16 * cfg.N)] {
        let runs = replicate_runs(&model, cfg.n, &paris_config(cfg, particles, DensityMode::Ideal), series_seed(cfg, tag), cfg.replicates)?;
        let finals: Vec<f64> = runs.iter().map(|r| r[r.len() - 1].estimate).collect();
        for (r, run) in runs.iter().enumerate() {
            let ess = running_ess_min(run);
            rows.push(row(cfg, 0.0, cfg.n, Some(r), &format!("paris-n{particles}"), finals[r], truth, Some(ess[ess.len() - 1])));
        }
        if tag == 1 {
            let z = (mean(&finals) - truth).abs() / std_err(&finals);
            checks.push(Check::new(
                "paris-matches-kalman",
                z <= 3.0,
                format!("|replicate mean - Kalman| <= 3 s.e. at N={particles}"),
                &[("z", z)],
            ));
        }
        sds.push(sample_var(&finals).sqrt());
    }
    let ratio = sds[0] / sds[1];
    checks.push(Check::new(
        "monte-carlo-rate",
        (2.8..=5.7).contains(&ratio),
        format!("sd(N={}) / sd(N={}) in [2.8, 5.7]", cfg.N, 16 * cfg.N),
        &[("sd_small", sds[0]), ("sd_large", sds[1]), ("ratio", ratio)],
    ));
    checks.push(ess_check(&rows));
    Ok(Report { experiment: Experiment::OracleLgss, rows, checks })
}

fn dg_mean_se(cfg: &ExperimentConfig, substeps: usize, point: usize, tag: u64) -> Result<(f64, f64), Error> {
    let (x, xn) = DG_POINTS[point];
    let dg = DgConfig::new(cfg.delta, substeps, cfg.dg_l)?;
    let ou = OrnsteinUhlenbeck { theta: cfg.theta };
    let mut rng = RngStream::new(series_seed(cfg, tag)).rng_at(substeps as u64, point as u64, 0);
    let draws = (0..DG_DRAWS)
        .map(|_| durham_gallant(&ou, &dg, x, xn, &mut rng).map(|(v, _)| v))
        .collect::<pmparis::Result<Vec<f64>>>()?;
    Ok((mean(&draws), std_err(&draws)))
}

/// Durham–Gallant estimator checks and a pseudo-marginal PaRIS run built on it.
pub fn dg_check(cfg: &ExperimentConfig) -> Result<Report, Error> {
    let gauss = |(m, v): (f64, f64), x: f64| normal_density(x, m, v);
    let mut rows = Vec::new();
    let mut checks = Vec::new();

    let k4: Vec<(f64, f64)> =
        (0..DG_POINTS.len()).into_par_iter().map(|p| dg_mean_se(cfg, 4, p, 1)).collect::<Result<_, _>>()?;
    let mut worst_z = 0.0f64;
    for (p, &(m, se)) in k4.iter().enumerate() {
        let (x, xn) = DG_POINTS[p];
        let oracle = gauss(ou_euler_transition(cfg.theta, cfg.delta, 4, x), xn);
        worst_z = worst_z.max((m - oracle).abs() / se);
        rows.push(row(cfg, cfg.delta / 4.0, p, None, "dg-k4", m, oracle, None));
    }
    checks.push(Check::new(
        "dg-unbiased-for-composed-euler",
        worst_z <= 3.0,
        format!("K=4, L={}: |mean of {DG_DRAWS} draws - composed Euler density| <= 3 s.e. at 5 points", cfg.dg_l),
        &[("max_z", worst_z)],
    ));

    let mut all_closer = true;
    let mut worst_gain = f64::INFINITY;
    for (p, &(x, xn)) in DG_POINTS.iter().enumerate() {
        let exact = gauss(ou_exact_transition(cfg.theta, cfg.delta, x), xn);
        let (coarse, _) = dg_mean_se(cfg, 2, p, 2)?;
        let (fine, _) = dg_mean_se(cfg, 32, p, 3)?;
        rows.push(row(cfg, cfg.delta / 2.0, p, None, "dg-k2", coarse, exact, None));
        rows.push(row(cfg, cfg.delta / 32.0, p, None, "dg-k32", fine, exact, None));
        let (e_coarse, e_fine) = ((coarse - exact).abs(), (fine - exact).abs());
        all_closer &= e_fine < e_coarse;
        worst_gain = worst_gain.min(e_coarse / e_fine);
    }
    checks.push(Check::new(
        "dg-converges-as-eps-shrinks",
        all_closer,
        "|mean(K=32) - exact| < |mean(K=2) - exact| at every point",
        &[("min_error_ratio", worst_gain)],
    ));

    // pseudo-marginal PaRIS targets the smoother of the K-step Euler model
    let data = simulate_ou_dataset(cfg.theta, cfg.delta, 0.0, cfg.n, cfg.seed)?;
    let ys = Arc::new(data.observations);
    let euler = LgssSpec::ou_euler(cfg.theta, cfg.delta, cfg.dg_k, 0.0);
    let oracle = kalman_sum(&euler, &ys)?;
    let model = dg_model(cfg, ys)?;
    let runs = replicate_runs(&model, cfg.n, &paris_config(cfg, cfg.N, DensityMode::PseudoMarginal), series_seed(cfg, 4), cfg.replicates)?;
    let finals: Vec<f64> = runs.iter().map(|r| r[r.len() - 1].estimate).collect();
    for (r, run) in runs.iter().enumerate() {
        let ess = running_ess_min(run);
        rows.push(row(cfg, cfg.delta / cfg.dg_k as f64, cfg.n, Some(r), "paris-dg", finals[r], oracle, Some(ess[ess.len() - 1])));
    }
    let z = (mean(&finals) - oracle).abs() / std_err(&finals);
    checks.push(Check::new(
        "dg-paris-matches-euler-kalman",
        z <= 3.0,
        "|replicate mean - Kalman on the Euler-discretized model| <= 3 s.e.",
        &[("mean", mean(&finals)), ("oracle", oracle), ("z", z)],
    ));
    checks.push(ess_check(&rows));
    Ok(Report { experiment: Experiment::DgCheck, rows, checks })
}

/// OU observed in unit noise with Durham–Gallant transition estimates and the
/// exact-model optimal proposal as importance kernel.
pub fn dg_model(
    cfg: &ExperimentConfig,
    ys: Arc<Vec<f64>>,
) -> Result<ModelSpec<f64, impl pmparis::TransitionEstimator<f64> + Clone>, Error> {
    let dg = DgConfig::new(cfg.delta, cfg.dg_k, cfg.dg_l)?;
    let theta = cfg.theta;
    let exact = LgssSpec::ou(cfg.theta, cfg.delta, 0.0);
    let steps = move |n: usize| {
        let y = ys[n];
        let estimator = DurhamGallant::new(OrnsteinUhlenbeck { theta }, dg, move |_: f64, xn: f64| normal_density(y, phi(xn), 1.0));
        let kernel = move |x: f64| optimal_proposal_lgss(&exact, x, y);
        StepSpec::new(
            estimator,
            move |x: &[f64], out: &mut [f64], rng: &mut StreamRng| {
                let (m, v) = kernel(x[0]);
                out[0] = m + v.sqrt() * standard_normal::<f64, _>(rng);
            },
            move |x: &[f64], xn: &[f64]| {
                let (m, v) = kernel(x[0]);
                normal_density(xn[0], m, v)
            },
        )
        .with_increment(move |x: &[f64], xn: &[f64]| if n == 0 { x[0] + xn[0] } else { xn[0] })
    };
    Ok(ModelSpec::new(1, |out: &mut [f64], rng: &mut StreamRng| out[0] = standard_normal(rng), steps))
}

#[allow(clippy::too_many_arguments)]
fn row(
    cfg: &ExperimentConfig,
    eps: f64,
    n: usize,
    replicate: Option<usize>,
    estimator: &str,
    estimate: f64,
    oracle: f64,
    ess_min: Option<f64>,
) -> ResultRow {
    ResultRow { experiment: cfg.experiment, eps, n, replicate, estimator: estimator.to_owned(), estimate, oracle, ess_min }
}
