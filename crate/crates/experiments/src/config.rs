//! Flat `key = value` experiment configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value {value:?} for `{key}`: {reason}")]
    InvalidValue { key: String, value: String, reason: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    FigureA,
    FigureB,
    OracleHmm,
    OracleLgss,
    DgCheck,
}

impl Experiment {
    pub fn label(self) -> &'static str {
        match self {
            Experiment::FigureA => "figure-a",
            Experiment::FigureB => "figure-b",
            Experiment::OracleHmm => "oracle-hmm",
            Experiment::OracleLgss => "oracle-lgss",
            Experiment::DgCheck => "dg-check",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "figure-a" | "figurea" => Experiment::FigureA,
            "figure-b" | "figureb" => Experiment::FigureB,
            "oracle-hmm" | "oraclehmm" => Experiment::OracleHmm,
            "oracle-lgss" | "oraclelgss" => Experiment::OracleLgss,
            "dg-check" | "dgcheck" => Experiment::DgCheck,
            _ => return Err("expected figure-a, figure-b, oracle-hmm, oracle-lgss or dg-check".into()),
        })
    }
}

/// Proposal used by the LGSS particle model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Proposal {
    /// Locally optimal proposal with fully adapted adjustment weights.
    Optimal,
    /// Prior transition with unit adjustment weights.
    Bootstrap,
}

impl FromStr for Proposal {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "optimal" => Ok(Proposal::Optimal),
            "bootstrap" => Ok(Proposal::Bootstrap),
            _ => Err("expected optimal or bootstrap".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backward {
    Rejection,
    /// Rejection with an exact fallback after `max_trials` attempts.
    RejectionExact,
    Mh,
}

impl FromStr for Backward {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "rejection" => Ok(Backward::Rejection),
            "rejection-exact" => Ok(Backward::RejectionExact),
            "mh" => Ok(Backward::Mh),
            _ => Err("expected rejection, rejection-exact or mh".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[allow(non_snake_case)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub theta: f64,
    pub delta: f64,
    pub eps_grid: Vec<f64>,
    pub n: usize,
    pub N: usize,
    pub M: usize,
    pub replicates: usize,
    pub seed: u64,
    pub output_path: PathBuf,
    /// Skew level for figure-b.
    pub fixed_eps: f64,
    pub proposal: Proposal,
    pub backward: Backward,
    pub max_trials: usize,
    pub mh_steps: usize,
    /// Bridge paths per Durham–Gallant estimate.
    pub dg_l: usize,
    /// Euler substeps per observation interval in the Durham–Gallant run.
    pub dg_k: usize,
}

pub const KEYS: &[&str] = &[
    "experiment",
    "theta",
    "delta",
    "eps_grid",
    "n",
    "N",
    "M",
    "replicates",
    "seed",
    "output_path",
    "fixed_eps",
    "proposal",
    "backward",
    "max_trials",
    "mh_steps",
    "dg_l",
    "dg_k",
];

impl ExperimentConfig {
    /// Defaults; the oracle and estimator checks use their own sizes.
    pub fn new(experiment: Experiment) -> Self {
        let base = ExperimentConfig {
            experiment,
            theta: 5.0,
            delta: 1.0,
            eps_grid: (0..=10).map(|k| k as f64 * 0.05).collect(),
            n: 50,
            N: 200,
            M: 2,
            replicates: 60,
            seed: 1,
            output_path: PathBuf::from(format!("results/{}.csv", experiment.label())),
            fixed_eps: 0.1,
            proposal: Proposal::Optimal,
            backward: Backward::RejectionExact,
            max_trials: 64,
            mh_steps: pmparis::backward::DEFAULT_MH_STEPS,
            dg_l: 1,
            dg_k: 4,
        };
        match experiment {
            Experiment::FigureA | Experiment::FigureB | Experiment::OracleLgss => base,
            Experiment::OracleHmm => {
                ExperimentConfig { n: 20, N: 5000, replicates: 50, backward: Backward::Rejection, ..base }
            }
            Experiment::DgCheck => ExperimentConfig { n: 20, N: 300, replicates: 40, backward: Backward::Mh, ..base },
        }
    }

    /// Parses a config file; `experiment` must be present.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
        let pairs = parse_pairs(&text)?;
        let experiment = pairs
            .iter()
            .rev()
            .find(|(k, _)| k == "experiment")
            .ok_or_else(|| ConfigError::Invalid(format!("{}: missing `experiment` key", path.display())))?;
        let experiment = parse_value("experiment", &experiment.1)?;
        let mut cfg = ExperimentConfig::new(experiment);
        for (k, v) in &pairs {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        match key {
            "experiment" => {
                let was_default = self.output_path == ExperimentConfig::new(self.experiment).output_path;
                self.experiment = parse_value(key, value)?;
                if was_default {
                    self.output_path = ExperimentConfig::new(self.experiment).output_path;
                }
            }
            "theta" => self.theta = parse_value(key, value)?,
            "delta" => self.delta = parse_value(key, value)?,
            "eps_grid" => {
                self.eps_grid = value
                    .split(',')
                    .map(|s| parse_value::<f64>(key, s.trim()))
                    .collect::<Result<_, _>>()?
            }
            "n" => self.n = parse_value(key, value)?,
            "N" => self.N = parse_value(key, value)?,
            "M" => self.M = parse_value(key, value)?,
            "replicates" => self.replicates = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "output_path" => self.output_path = PathBuf::from(value),
            "fixed_eps" => self.fixed_eps = parse_value(key, value)?,
            "proposal" => self.proposal = parse_value(key, value)?,
            "backward" => self.backward = parse_value(key, value)?,
            "max_trials" => self.max_trials = parse_value(key, value)?,
            "mh_steps" => self.mh_steps = parse_value(key, value)?,
            "dg_l" => self.dg_l = parse_value(key, value)?,
            "dg_k" => self.dg_k = parse_value(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.to_owned())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_owned()));
        if !(self.delta > 0.0 && self.delta.is_finite()) || !self.theta.is_finite() {
            return bad("theta must be finite and delta positive");
        }
        if self.eps_grid.is_empty() || self.eps_grid.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return bad("eps_grid must be a nonempty list of values in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.fixed_eps) {
            return bad("fixed_eps must lie in [0, 1]");
        }
        if self.n == 0 || self.N == 0 || self.M == 0 || self.max_trials == 0 || self.mh_steps == 0 || self.dg_l == 0 || self.dg_k == 0 {
            return bad("n, N, M, max_trials, mh_steps, dg_l and dg_k must be positive");
        }
        if self.replicates < 2 {
            return bad("replicates must be at least 2");
        }
        Ok(())
    }

    pub fn backward_config(&self) -> pmparis::BackwardConfig {
        use pmparis::BackwardConfig;
        match self.backward {
            Backward::Rejection => BackwardConfig::rejection(self.M),
            Backward::RejectionExact => BackwardConfig::rejection_then_exact(self.M, self.max_trials),
            Backward::Mh => BackwardConfig::independent_mh(self.M, self.mh_steps),
        }
    }
}

fn parse_value<V: FromStr>(key: &str, value: &str) -> Result<V, ConfigError>
where
    V::Err: fmt::Display,
{
    value.parse().map_err(|e: V::Err| ConfigError::InvalidValue {
        key: key.to_owned(),
        value: value.to_owned(),
        reason: e.to_string(),
    })
}

/// `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax { line: i + 1, text: raw.to_owned() })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1, text: raw.to_owned() });
        }
        if !KEYS.contains(&k) {
            return Err(ConfigError::UnknownKey(k.to_owned()));
        }
        out.push((k.to_owned(), v.trim().to_owned()));
    }
    Ok(out)
}
