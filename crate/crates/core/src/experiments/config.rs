use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::amp::{LambdaSchedule, ThresholdPolicy};
use crate::error::{Error, Result};
use crate::par::Parallelism;
use crate::signal_model::OperatorKind;
use crate::state_evolution::ExpectationEngine;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Observables,
    PhaseTransition,
    OperatingChars,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Observables => "observables",
            ExperimentKind::PhaseTransition => "phase_transition",
            ExperimentKind::OperatingChars => "operating_chars",
        }
    }
}

/// Threshold policy by short name: minimax, fixed τ, floating (λ) and the
/// zero-λ limit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyChoice {
    M,
    T,
    A,
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Signal length `N`.
    pub n: usize,
    /// Instances per grid cell.
    pub instances: usize,
    pub master_seed: u64,
    pub deltas: Vec<f64>,
    /// Sparsity ratios `ρ = ε/δ` (observables, phase transition).
    pub rhos: Vec<f64>,
    /// Generalized Gaussian exponents (operating characteristics).
    pub alphas: Vec<f64>,
    /// Penalties for operating characteristics. Empty selects
    /// `lambdas_per_cell` values inside each cell's validity region.
    pub lambdas: Vec<f64>,
    pub lambdas_per_cell: usize,
    pub noise_variance: f64,
    /// Value of the nonzero entries of sparse signals.
    pub amplitude: f64,
    pub policy: PolicyChoice,
    /// For the `t` policy; the `m` policy derives it from δ.
    pub tau: Option<f64>,
    /// For the `a` policy.
    pub lambda: Option<f64>,
    pub onsager: bool,
    /// Also run the algorithm without the Onsager term (phase transition).
    pub compare_ist: bool,
    pub max_iters: usize,
    /// Early stop on relative iterate change; 0 runs all iterations.
    pub rel_tol: f64,
    pub success_tol: f64,
    pub operator: OperatorKind,
    pub engine: ExpectationEngine,
    pub lasso_tol: f64,
    pub lasso_max_sweeps: usize,
    pub parallelism: Parallelism,
    pub output: PathBuf,
}

/// Partial configuration: every field optional. Used for config files and
/// command-line overrides alike.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub experiment: Option<ExperimentKind>,
    pub n: Option<usize>,
    pub instances: Option<usize>,
    pub master_seed: Option<u64>,
    pub deltas: Option<Vec<f64>>,
    pub rhos: Option<Vec<f64>>,
    pub alphas: Option<Vec<f64>>,
    pub lambdas: Option<Vec<f64>>,
    pub lambdas_per_cell: Option<usize>,
    pub noise_variance: Option<f64>,
    pub amplitude: Option<f64>,
    pub policy: Option<PolicyChoice>,
    pub tau: Option<f64>,
    pub lambda: Option<f64>,
    pub onsager: Option<bool>,
    pub compare_ist: Option<bool>,
    pub max_iters: Option<usize>,
    pub rel_tol: Option<f64>,
    pub success_tol: Option<f64>,
    pub operator: Option<OperatorKind>,
    pub engine: Option<ExpectationEngine>,
    pub lasso_tol: Option<f64>,
    pub lasso_max_sweeps: Option<usize>,
    pub parallelism: Option<Parallelism>,
    pub output: Option<PathBuf>,
}

fn grid(lo: f64, step: f64, count: usize) -> Vec<f64> {
    // rounded so grid values print cleanly
    (0..count).map(|k| ((lo + k as f64 * step) * 1e9).round() / 1e9).collect()
}

impl ExperimentConfig {
    pub fn defaults(kind: ExperimentKind) -> Self {
        let base = Self {
            experiment: kind,
            n: 500,
            instances: 50,
            master_seed: 2009,
            deltas: vec![0.3],
            rhos: vec![0.15],
            alphas: vec![1.0],
            lambdas: Vec::new(),
            lambdas_per_cell: 5,
            noise_variance: 0.0,
            amplitude: 1.0,
            policy: PolicyChoice::M,
            tau: None,
            lambda: None,
            onsager: true,
            compare_ist: true,
            max_iters: 1000,
            rel_tol: 0.0,
            success_tol: 1e-3,
            operator: OperatorKind::DenseGaussian,
            engine: ExpectationEngine::ClosedForm,
            lasso_tol: crate::lasso::DEFAULT_TOL,
            lasso_max_sweeps: crate::lasso::DEFAULT_MAX_SWEEPS,
            parallelism: Parallelism::Parallel,
            output: PathBuf::from("results"),
        };
        match kind {
            ExperimentKind::Observables => Self {
                n: 5000,
                instances: 10,
                max_iters: 30,
                ..base
            },
            ExperimentKind::PhaseTransition => Self {
                deltas: grid(0.05, 0.05, 19),
                rhos: grid(0.03, 0.03, 33),
                rel_tol: 1e-10,
                ..base
            },
            ExperimentKind::OperatingChars => Self {
                deltas: grid(0.1, 0.1, 5),
                alphas: vec![0.35, 0.5, 0.65, 0.75, 1.0],
                ..base
            },
        }
    }

    pub fn apply(&mut self, o: &ConfigOverrides) -> Result<()> {
        if let Some(kind) = o.experiment {
            if kind != self.experiment {
                return Err(Error::Config(format!(
                    "config is for {} but {} was requested",
                    kind.name(),
                    self.experiment.name()
                )));
            }
        }
        macro_rules! take {
            ($($f:ident),*) => {$(
                if let Some(v) = &o.$f {
                    self.$f = v.clone();
                }
            )*};
        }
        take!(
            n, instances, master_seed, deltas, rhos, alphas, lambdas, lambdas_per_cell, noise_variance,
            amplitude, policy, onsager, compare_ist, max_iters, rel_tol, success_tol, operator, engine,
            lasso_tol, lasso_max_sweeps, parallelism, output
        );
        if o.tau.is_some() {
            self.tau = o.tau;
        }
        if o.lambda.is_some() {
            self.lambda = o.lambda;
        }
        Ok(())
    }

    /// Defaults for `kind`, then the TOML file at `path` if given.
    pub fn load(kind: ExperimentKind, path: Option<&Path>) -> Result<Self> {
        let mut cfg = Self::defaults(kind);
        if let Some(p) = path {
            let text = std::fs::read_to_string(p)?;
            let o: ConfigOverrides = toml::from_str(&text)?;
            cfg.apply(&o)?;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.instances == 0 {
            return bad("instances must be at least 1".into());
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1".into());
        }
        if self.deltas.is_empty() || self.deltas.iter().any(|&d| !(d > 0.0 && d <= 1.0)) {
            return bad(format!("deltas must be a nonempty list in (0, 1], got {:?}", self.deltas));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return bad(format!("noise_variance = {} must be >= 0", self.noise_variance));
        }
        if !(self.success_tol > 0.0) || !(self.rel_tol >= 0.0) {
            return bad("success_tol must be > 0 and rel_tol >= 0".into());
        }
        self.engine.validate()?;
        match self.experiment {
            ExperimentKind::Observables | ExperimentKind::PhaseTransition => {
                if self.rhos.is_empty() || self.rhos.iter().any(|&r| !(0.0..=1.0).contains(&r)) {
                    return bad(format!("rhos must be a nonempty list in [0, 1], got {:?}", self.rhos));
                }
                if self.experiment == ExperimentKind::PhaseTransition && self.deltas.iter().any(|&d| d >= 1.0) {
                    return bad("phase transition deltas must be < 1".into());
                }
                if self.policy == PolicyChoice::M {
                    if self.deltas.iter().any(|&d| d >= 1.0) {
                        return bad("the minimax policy needs deltas < 1".into());
                    }
                } else {
                    self.policy(self.deltas[0])?.validate()?;
                }
            }
            ExperimentKind::OperatingChars => {
                if self.alphas.is_empty() || self.alphas.iter().any(|&a| !(a > 0.0)) {
                    return bad(format!("alphas must be a nonempty list of positive values, got {:?}", self.alphas));
                }
                if self.lambdas.is_empty() && self.lambdas_per_cell == 0 {
                    return bad("give lambdas or a positive lambdas_per_cell".into());
                }
                if self.lambdas.iter().any(|&l| !(l >= 0.0)) {
                    return bad("lambdas must be >= 0".into());
                }
            }
        }
        Ok(())
    }

    /// The threshold policy for undersampling `delta`.
    pub fn policy(&self, delta: f64) -> Result<ThresholdPolicy> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::Config(format!("policy {:?} needs {name}", self.policy)))
        };
        Ok(match self.policy {
            PolicyChoice::M => ThresholdPolicy::minimax(delta)?,
            PolicyChoice::T => ThresholdPolicy::FixedT {
                tau: need(self.tau, "tau")?,
            },
            PolicyChoice::A => ThresholdPolicy::LassoA {
                lambda: need(self.lambda, "lambda")?,
            },
            PolicyChoice::Zero => ThresholdPolicy::ZeroBp {
                schedule: LambdaSchedule::default(),
            },
        })
    }
}
