use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pmparis_experiments::report::write_outputs;
use pmparis_experiments::{run, Error, Experiment, ExperimentConfig, Report};

#[derive(Parser)]
#[command(name = "pmparis", about = "Pseudo-marginal PaRIS experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a `key = value` config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Skew-model bias against the skew level.
    FigureA(Overrides),
    /// Skew-model bias and spread against the horizon.
    FigureB(Overrides),
    /// Finite-state and linear-Gaussian oracle agreement.
    OracleCheck(Overrides),
    /// Durham–Gallant estimator checks.
    DgCheck(Overrides),
}

/// Per-field overrides, applied after the config file.
#[derive(Args, Default)]
#[allow(non_snake_case)]
struct Overrides {
    #[arg(long = "theta")]
    theta: Option<String>,
    #[arg(long = "delta")]
    delta: Option<String>,
    #[arg(long = "eps_grid")]
    eps_grid: Option<String>,
    #[arg(long = "n")]
    n: Option<String>,
    #[arg(long = "N")]
    N: Option<String>,
    #[arg(long = "M")]
    M: Option<String>,
    #[arg(long = "replicates")]
    replicates: Option<String>,
    #[arg(long = "seed")]
    seed: Option<String>,
    #[arg(long = "output_path")]
    output_path: Option<String>,
    #[arg(long = "fixed_eps")]
    fixed_eps: Option<String>,
    #[arg(long = "proposal")]
    proposal: Option<String>,
    #[arg(long = "backward")]
    backward: Option<String>,
    #[arg(long = "max_trials")]
    max_trials: Option<String>,
    #[arg(long = "mh_steps")]
    mh_steps: Option<String>,
    #[arg(long = "dg_l")]
    dg_l: Option<String>,
    #[arg(long = "dg_k")]
    dg_k: Option<String>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) -> Result<(), Error> {
        let pairs = [
            ("theta", &self.theta),
            ("delta", &self.delta),
            ("eps_grid", &self.eps_grid),
            ("n", &self.n),
            ("N", &self.N),
            ("M", &self.M),
            ("replicates", &self.replicates),
            ("seed", &self.seed),
            ("output_path", &self.output_path),
            ("fixed_eps", &self.fixed_eps),
            ("proposal", &self.proposal),
            ("backward", &self.backward),
            ("max_trials", &self.max_trials),
            ("mh_steps", &self.mh_steps),
            ("dg_l", &self.dg_l),
            ("dg_k", &self.dg_k),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        Ok(())
    }
}

fn configure(experiment: Experiment, overrides: &Overrides) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::new(experiment);
    overrides.apply(&mut cfg)?;
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<Vec<Report>, Error> {
    let configs = match &cli.command {
        Command::Run { config, overrides } => {
            let mut cfg = ExperimentConfig::from_file(config)?;
            overrides.apply(&mut cfg)?;
            vec![cfg]
        }
        Command::FigureA(o) => vec![configure(Experiment::FigureA, o)?],
        Command::FigureB(o) => vec![configure(Experiment::FigureB, o)?],
        Command::OracleCheck(o) => {
            let mut lgss = configure(Experiment::OracleLgss, o)?;
            let mut hmm = configure(Experiment::OracleHmm, o)?;
            // both reports share one CSV
            let path = o.output_path.clone().map(PathBuf::from).unwrap_or_else(|| "results/oracle-check.csv".into());
            lgss.output_path = path.clone();
            hmm.output_path = path;
            vec![hmm, lgss]
        }
        Command::DgCheck(o) => vec![configure(Experiment::DgCheck, o)?],
    };
    for cfg in &configs {
        cfg.validate()?;
    }
    let reports = configs.iter().map(run).collect::<Result<Vec<_>, _>>()?;
    let path = &configs[0].output_path;
    write_outputs(path, &reports).map_err(|source| Error::Io { path: path.clone(), source })?;
    for r in &reports {
        for c in &r.checks {
            println!("{} {}: {} ({})", if c.passed { "PASS" } else { "FAIL" }, r.experiment, c.name, c.requirement);
        }
    }
    println!("wrote {}", path.display());
    Ok(reports)
}

fn init_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("PARIS_THREADS") else {
        return Ok(());
    };
    let threads: usize = v.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        pmparis_experiments::ConfigError::InvalidValue {
            key: "PARIS_THREADS".into(),
            value: v.clone(),
            reason: "expected a positive integer".into(),
        }
    })?;
    // fails only if a pool already exists
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| execute(cli));
    match result {
        Ok(reports) if reports.iter().all(Report::passed) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
