//! `esig`: expected signatures, chaos kernels, verification suites, oracle
//! convergence studies and Monte Carlo sampling from the command line.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::bail;
use clap::{Parser, Subcommand, ValueEnum};
use esig::commands;
use esig::config::{Command, ModelConfig, RunConfig};
use esig::output::{document, emit, error_document};
use esig::parallel::configure_threads;

#[derive(Parser)]
#[command(name = "esig", version, about = "Expected signatures and Wiener chaos kernels of Gaussian processes")]
struct Cli {
    /// Configuration file, or an output document whose embedded
    /// configuration is repeated. Flags given alongside override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Option<Sub>,
}

#[derive(Subcommand)]
enum Sub {
    /// Expected signature (chaos 0) or chaos kernels on a lattice of free times.
    Compute(Args),
    /// Run a verification suite; exits 0 iff every check passes.
    Verify(Args),
    /// Compare discrete-oracle values with the analytic engine along grids.
    Convergence(Args),
    /// Monte Carlo estimate of the expected signature on a grid.
    Sample(Args),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Fbm,
    Bm,
    Bridge,
    Ou,
}

#[derive(clap::Args, Default)]
struct Args {
    /// Covariance model; `fbm` when only --hurst is given, else `bm`.
    #[arg(long, value_enum)]
    model: Option<ModelKind>,
    /// Hurst parameter of fbm, in (1/4, 1).
    #[arg(long)]
    hurst: Option<f64>,
    /// Model horizon; the pin time for the bridge.
    #[arg(long)]
    horizon: Option<f64>,
    /// Bridge cut-off before the pin time.
    #[arg(long)]
    eps: Option<f64>,
    /// OU volatility.
    #[arg(long)]
    sigma: Option<f64>,
    /// OU mean-reversion rate.
    #[arg(long)]
    theta: Option<f64>,
    /// Interval start.
    #[arg(long)]
    s: Option<f64>,
    /// Interval end; defaults to the model horizon.
    #[arg(long)]
    t: Option<f64>,
    /// Path dimension.
    #[arg(long)]
    dim: Option<usize>,
    /// Signature level, or word length for kernels.
    #[arg(long)]
    level: Option<usize>,
    /// Chaos order m.
    #[arg(long)]
    chaos: Option<usize>,
    /// Kernel word as comma-separated letters, e.g. 1,2,1.
    #[arg(long, value_delimiter = ',')]
    word: Option<Vec<usize>>,
    /// Free-time tuples: comma-separated times, tuples separated by ';'.
    #[arg(long)]
    free_times: Option<String>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    high_dim_rel_tol: Option<f64>,
    #[arg(long)]
    abs_tol: Option<f64>,
    #[arg(long)]
    max_depth: Option<usize>,
    /// Power map exponent of the quasi-Monte Carlo fallback.
    #[arg(long)]
    grading_exponent: Option<f64>,
    /// Lattice size of the quasi-Monte Carlo fallback; 0 disables it.
    #[arg(long)]
    mc_fallback_samples: Option<usize>,
    /// Seed of the quasi-Monte Carlo random shifts.
    #[arg(long)]
    quadrature_seed: Option<u64>,
    /// Integrate every variable numerically instead of using closed forms.
    #[arg(long)]
    no_reductions: bool,
    /// Grid cell counts for convergence studies, e.g. 8,16,32.
    #[arg(long, value_delimiter = ',')]
    grids: Option<Vec<usize>>,
    /// Grid cell count for sampling.
    #[arg(long)]
    grid: Option<usize>,
    /// Number of sampled paths.
    #[arg(long)]
    paths: Option<u64>,
    /// Master seed of sampled paths.
    #[arg(long)]
    seed: Option<u64>,
    /// Assignment budget of the discrete oracle.
    #[arg(long)]
    oracle_budget: Option<u64>,
    /// Verification suite name, or `all`.
    #[arg(long)]
    suite: Option<String>,
    /// Write the JSON document here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write the word table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn parse_free_times(text: &str) -> anyhow::Result<Vec<Vec<f64>>> {
    text.split(';')
        .map(|tuple| {
            tuple
                .split(',')
                .filter(|x| !x.trim().is_empty())
                .map(|x| Ok(x.trim().parse::<f64>()?))
                .collect()
        })
        .collect()
}

fn resolve_model(a: &Args, base: Option<ModelConfig>) -> anyhow::Result<ModelConfig> {
    let base_horizon = match base {
        Some(ModelConfig::Fbm { horizon, .. })
        | Some(ModelConfig::Bm { horizon })
        | Some(ModelConfig::Bridge { horizon, .. })
        | Some(ModelConfig::Ou { horizon, .. }) => horizon,
        None => 1.0,
    };
    let horizon = a.horizon.unwrap_or(base_horizon);
    let kind = match (a.model, base) {
        (Some(k), _) => k,
        (None, _) if a.hurst.is_some() => ModelKind::Fbm,
        (None, Some(ModelConfig::Fbm { .. })) => ModelKind::Fbm,
        (None, Some(ModelConfig::Bridge { .. })) => ModelKind::Bridge,
        (None, Some(ModelConfig::Ou { .. })) => ModelKind::Ou,
        (None, _) => ModelKind::Bm,
    };
    Ok(match kind {
        ModelKind::Fbm => {
            let hurst = match (a.hurst, base) {
                (Some(h), _) => h,
                (None, Some(ModelConfig::Fbm { hurst, .. })) => hurst,
                _ => bail!("--model fbm needs --hurst"),
            };
            ModelConfig::Fbm { hurst, horizon }
        }
        ModelKind::Bm => ModelConfig::Bm { horizon },
        ModelKind::Bridge => {
            let base_eps = match base {
                Some(ModelConfig::Bridge { eps, .. }) => eps,
                _ => None,
            };
            ModelConfig::Bridge {
                horizon,
                eps: a.eps.or(base_eps),
            }
        }
        ModelKind::Ou => {
            let (bs, bt) = match base {
                Some(ModelConfig::Ou { sigma, theta, .. }) => (sigma, theta),
                _ => (1.0, 1.0),
            };
            ModelConfig::Ou {
                sigma: a.sigma.unwrap_or(bs),
                theta: a.theta.unwrap_or(bt),
                horizon,
            }
        }
    })
}

fn model_flags_given(a: &Args) -> bool {
    a.model.is_some() || a.hurst.is_some() || a.horizon.is_some() || a.eps.is_some() || a.sigma.is_some() || a.theta.is_some()
}

fn resolve(cli: Cli) -> anyhow::Result<RunConfig> {
    let (command, args) = match cli.command {
        Some(Sub::Compute(a)) => (Some(Command::Compute), a),
        Some(Sub::Verify(a)) => (Some(Command::Verify), a),
        Some(Sub::Convergence(a)) => (Some(Command::Convergence), a),
        Some(Sub::Sample(a)) => (Some(Command::Sample), a),
        None => (None, Args::default()),
    };
    let mut cfg = match (&cli.config, command) {
        (Some(path), _) => {
            let mut cfg = RunConfig::load(path)?;
            // Never overwrite the files of the run being repeated.
            cfg.output = None;
            cfg.csv = None;
            if let Some(c) = command {
                if c != cfg.command {
                    bail!("subcommand `{}` does not match `{}` in {}", c.name(), cfg.command.name(), path.display());
                }
            }
            if model_flags_given(&args) {
                cfg.model = resolve_model(&args, Some(cfg.model))?;
                if args.t.is_none() {
                    cfg.t = cfg.model.build()?.as_dyn().horizon().min(cfg.t);
                }
            }
            cfg
        }
        (None, Some(c)) => RunConfig::new(c, resolve_model(&args, None)?)?,
        (None, None) => bail!("a subcommand or --config is required; see `esig --help`"),
    };
    let a = args;
    macro_rules! set {
        ($($field:ident),*) => { $(if let Some(v) = a.$field.clone() { cfg.$field = v; })* };
    }
    set!(s, t, dim, level, chaos, grids, grid, paths, seed, oracle_budget);
    if let Some(w) = a.word.clone() {
        cfg.word = Some(w);
    }
    if let Some(ft) = &a.free_times {
        cfg.free_times = Some(parse_free_times(ft)?);
    }
    let q = &mut cfg.quadrature;
    if let Some(v) = a.rel_tol {
        q.rel_tol = v;
    }
    if let Some(v) = a.high_dim_rel_tol {
        q.high_dim_rel_tol = v;
    }
    if let Some(v) = a.abs_tol {
        q.abs_tol = v;
    }
    if let Some(v) = a.max_depth {
        q.max_depth = v;
    }
    if let Some(v) = a.grading_exponent {
        q.grading_exponent = Some(v);
    }
    if let Some(v) = a.mc_fallback_samples {
        q.mc_fallback_samples = v;
    }
    if let Some(v) = a.quadrature_seed {
        q.rng_seed = v;
    }
    if a.no_reductions {
        q.closed_form_reductions = false;
    }
    if a.suite.is_some() {
        cfg.suite = a.suite;
    }
    if a.output.is_some() {
        cfg.output = a.output;
    }
    if a.csv.is_some() {
        cfg.csv = a.csv;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut output = None;
    let result = configure_threads().and_then(|()| resolve(cli)).and_then(|cfg| {
        output = cfg.output.clone();
        let outcome = commands::run(&cfg)?;
        emit(&document(&cfg, outcome.result), cfg.output.as_deref())?;
        Ok(outcome.success)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            let _ = emit(&error_document(&err), output.as_deref());
            ExitCode::from(2)
        }
    }
}
