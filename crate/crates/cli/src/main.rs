use std::path::PathBuf;
use std::time::Instant;

use amp_core::experiments::{
    run_observables, run_operating_chars, run_phase_transition, write_report, ConfigOverrides,
    ExperimentConfig, ExperimentKind, PolicyChoice, Report,
};
use amp_core::lasso::{lasso_objective, solve_lasso, DEFAULT_MAX_SWEEPS, DEFAULT_TOL};
use amp_core::nonlinearity::Nonlinearity;
use amp_core::signal_model::{generate_instance, OperatorKind, PriorDistribution};
use amp_core::state_evolution::{
    hfp, proportional_psi, psi, se_phase_transition, stability_coefficient, transition_point, Calibration,
    ExpectationEngine, LEAST_FAVORABLE_AMPLITUDE,
};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(name = "amp", version, about = "AMP, state evolution and validation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Observables per iteration against their predictions.
    Observables(ExperimentArgs),
    /// Success fractions over a (delta, rho) grid.
    PhaseTransition(ExperimentArgs),
    /// Penalized least-squares MSE against calibrated predictions.
    OperatingChars(ExperimentArgs),
    /// Direct state-evolution queries.
    Se {
        #[command(subcommand)]
        query: SeQuery,
    },
    /// Solve one penalized least-squares instance.
    Lasso(LassoArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    M,
    T,
    A,
    Zero,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML file with any of the configuration keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Signal length N.
    #[arg(long)]
    n: Option<usize>,
    /// Instances per grid cell.
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated list.
    #[arg(long, value_delimiter = ',')]
    delta: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    rho: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    /// Penalties (operating-chars) or the single λ of policy `a`.
    #[arg(long, value_delimiter = ',')]
    lambda: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    policy: Option<PolicyArg>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    no_onsager: bool,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    success_tol: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run on the calling thread only.
    #[arg(long)]
    sequential: bool,
}

impl ExperimentArgs {
    fn config(&self, kind: ExperimentKind) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(kind, self.config.as_deref())
            .with_context(|| "loading configuration")?;
        let policy = self.policy.map(|p| match p {
            PolicyArg::M => PolicyChoice::M,
            PolicyArg::T => PolicyChoice::T,
            PolicyArg::A => PolicyChoice::A,
            PolicyArg::Zero => PolicyChoice::Zero,
        });
        let (lambdas, lambda) = match (&self.lambda, kind) {
            (Some(l), ExperimentKind::OperatingChars) => (Some(l.clone()), None),
            (Some(l), _) => {
                if l.len() != 1 {
                    bail!("--lambda takes a single value for this experiment");
                }
                (None, Some(l[0]))
            }
            (None, _) => (None, None),
        };
        let o = ConfigOverrides {
            n: self.n,
            instances: self.instances,
            master_seed: self.seed,
            deltas: self.delta.clone(),
            rhos: self.rho.clone(),
            alphas: self.alpha.clone(),
            lambdas,
            lambda,
            policy,
            tau: self.tau,
            onsager: self.no_onsager.then_some(false),
            compare_ist: self.no_onsager.then_some(false),
            max_iters: self.max_iters,
            success_tol: self.success_tol,
            output: self.out.clone(),
            parallelism: self.sequential.then_some(amp_core::par::Parallelism::Sequential),
            ..Default::default()
        };
        cfg.apply(&o)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct PriorArgs {
    #[arg(long, default_value_t = 0.3)]
    delta: f64,
    /// Sparse prior with ε = ρδ and unit nonzeros.
    #[arg(long, default_value_t = 0.15)]
    rho: f64,
    /// Generalized Gaussian prior instead of the sparse one.
    #[arg(long)]
    alpha: Option<f64>,
    /// Noise variance.
    #[arg(long, default_value_t = 0.0)]
    v: f64,
}

impl PriorArgs {
    fn prior(&self) -> Result<PriorDistribution> {
        Ok(match self.alpha {
            Some(a) => PriorDistribution::generalized_gaussian(a, 1.0)?,
            None => PriorDistribution::sparse(self.rho * self.delta, 1.0)?,
        })
    }
}

#[derive(Subcommand)]
enum SeQuery {
    /// One evaluation of the MSE map.
    Psi {
        #[command(flatten)]
        prior: PriorArgs,
        #[arg(long)]
        sigma2: f64,
        #[arg(long)]
        theta: f64,
    },
    /// Highest fixed point and stability coefficient for θ = τσ.
    Hfp {
        #[command(flatten)]
        prior: PriorArgs,
        /// Defaults to the minimax value for δ.
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Phase transition and minimax τ.
    RhoSe {
        #[arg(long, value_delimiter = ',', default_value = "0.3")]
        delta: Vec<f64>,
    },
    /// λ ↔ τ calibration.
    Calibrate {
        #[command(flatten)]
        prior: PriorArgs,
        #[arg(long, conflicts_with = "lambda")]
        tau: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
    },
}

#[derive(Args)]
struct LassoArgs {
    #[command(flatten)]
    prior: PriorArgs,
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long)]
    lambda: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_SWEEPS)]
    max_sweeps: usize,
}

fn run_experiment(kind: ExperimentKind, args: &ExperimentArgs) -> Result<()> {
    let cfg = args.config(kind)?;
    let start = Instant::now();
    let report = match kind {
        ExperimentKind::Observables => Report::Observables(run_observables(&cfg)?),
        ExperimentKind::PhaseTransition => Report::PhaseTransition(run_phase_transition(&cfg)?),
        ExperimentKind::OperatingChars => Report::OperatingChars(run_operating_chars(&cfg)?),
    };
    let paths = write_report(&cfg, &report, start.elapsed())?;
    let list: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
    emit(&list.join("\n"))
}

/// Prints a line to stdout; a closed pipe (`| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    use std::io::Write;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn run_se(query: &SeQuery) -> Result<serde_json::Value> {
    let nl = Nonlinearity::SoftThreshold;
    let engine = ExpectationEngine::ClosedForm;
    Ok(match query {
        SeQuery::Psi { prior, sigma2, theta } => {
            let f = prior.prior()?;
            json!({ "psi": psi(*sigma2, prior.v, prior.delta, *theta, &f, &nl, &engine)? })
        }
        SeQuery::Hfp { prior, tau } => {
            let f = prior.prior()?;
            let tau = match tau {
                Some(t) => *t,
                None => amp_core::state_evolution::minimax_tau(prior.delta)?,
            };
            let map = proportional_psi(tau, prior.v, prior.delta, &f, &nl, &engine)?;
            let fp = hfp(&map, 4.0 * (f.second_moment() / prior.delta + prior.v).max(1e-300));
            json!({
                "tau": tau,
                "hfp": fp.value,
                "saturated": fp.saturated,
                "stability_coefficient": stability_coefficient(&map, fp.value),
            })
        }
        SeQuery::RhoSe { delta } => {
            let rows = delta
                .iter()
                .map(|&d| {
                    let tp = transition_point(d, LEAST_FAVORABLE_AMPLITUDE)?;
                    debug_assert_eq!(tp.rho, se_phase_transition(d)?);
                    Ok(json!({ "delta": d, "rho_se": tp.rho, "tau": tp.tau }))
                })
                .collect::<Result<Vec<_>>>()?;
            json!(rows)
        }
        SeQuery::Calibrate { prior, tau, lambda } => {
            let f = prior.prior()?;
            let cal = Calibration::new(prior.v, prior.delta, &f, &engine)?;
            let mut out = json!({
                "tau_lo": cal.tau_lo,
                "tau_hi": cal.tau_hi,
                "lambda_lo": cal.lambda_lo,
                "lambda_hi": cal.lambda_hi,
            });
            if let Some(t) = tau {
                out["tau"] = json!(t);
                out["lambda"] = json!(cal.lambda(*t)?);
            }
            if let Some(l) = lambda {
                out["lambda"] = json!(l);
                out["tau"] = json!(cal.tau(*l)?);
            }
            out
        }
    })
}

fn run_lasso(args: &LassoArgs) -> Result<serde_json::Value> {
    let f = args.prior.prior()?;
    let inst = generate_instance(&f, args.prior.delta, args.n, args.prior.v, OperatorKind::DenseGaussian, args.seed)?;
    let sol = solve_lasso(&inst, args.lambda, args.tol, args.max_sweeps)?;
    let mse = sol.x_hat.iter().zip(&inst.s0).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / args.n as f64;
    Ok(json!({
        "lambda": sol.lambda,
        "sweeps": sol.iterations,
        "kkt_residual": sol.kkt_residual,
        "objective": lasso_objective(&inst, &sol.x_hat, sol.lambda),
        "mse": mse,
        "nonzeros": sol.x_hat.iter().filter(|v| **v != 0.0).count(),
    }))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Observables(a) => run_experiment(ExperimentKind::Observables, a),
        Command::PhaseTransition(a) => run_experiment(ExperimentKind::PhaseTransition, a),
        Command::OperatingChars(a) => run_experiment(ExperimentKind::OperatingChars, a),
        Command::Se { query } => emit(&serde_json::to_string_pretty(&run_se(query)?)?),
        Command::Lasso(a) => emit(&serde_json::to_string_pretty(&run_lasso(a)?)?),
    }
}
