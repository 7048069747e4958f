//! The AMP iteration, its Onsager-free variant (iterative soft thresholding)
//! and per-iteration observables.
//!
//! One step maps `(x^t, z^t, θ_t)` to
//!
//! ```text
//! u       = x^t + A* z^t
//! x^{t+1} = η(u; θ_t)
//! z^{t+1} = y − A x^{t+1} + (1/δ) z^t ⟨η'(u; θ_t)⟩     (Onsager term optional)
//! θ_{t+1} = policy(σ̂_{t+1}, θ_t, ⟨η'⟩)
//! ```
//!
//! starting from `x^0 = 0`, `z^0 = y`.

mod policy;

pub use policy::{update_threshold, LambdaSchedule, ThresholdInputs, ThresholdPolicy};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::Nonlinearity;
use crate::signal_model::{dot, ProblemInstance};

/// Iterate of the algorithm.
#[derive(Clone, Debug, PartialEq)]
pub struct AmpState {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub theta: f64,
    pub sigma_hat: f64,
    pub t: usize,
    /// `⟨η'⟩` at the pseudo-data that produced `x` (0 at `t = 0`).
    pub eta_prime_mean: f64,
}

impl AmpState {
    /// `x = 0`, `z = y`, `θ_0` from the policy.
    pub fn initial(inst: &ProblemInstance, policy: &ThresholdPolicy) -> Self {
        let sigma_hat = estimate_sigma(&inst.y, inst.n());
        Self {
            x: vec![0.0; inst.big_n()],
            z: inst.y.clone(),
            theta: policy.initial_theta(sigma_hat),
            sigma_hat,
            t: 0,
            eta_prime_mean: 0.0,
        }
    }
}

/// `sqrt(‖z‖² / n)`.
pub fn estimate_sigma(z: &[f64], n: usize) -> f64 {
    (dot(z, z) / n as f64).sqrt()
}

/// `v + ‖x − s0‖² / (N δ)`. Needs the true signal.
pub fn effective_variance(x: &[f64], s0: &[f64], v: f64, delta: f64) -> f64 {
    let err: f64 = x.iter().zip(s0).map(|(a, b)| (a - b) * (a - b)).sum();
    v + err / (x.len() as f64 * delta)
}

/// One iteration. `onsager = false` gives plain iterative thresholding.
pub fn amp_step(
    state: &AmpState,
    inst: &ProblemInstance,
    nl: &Nonlinearity,
    policy: &ThresholdPolicy,
    onsager: bool,
) -> Result<AmpState> {
    let (n, big_n) = inst.operator.dims();
    if state.x.len() != big_n || state.z.len() != n {
        return Err(Error::Dimension(format!(
            "state has |x| = {}, |z| = {} for a {n}x{big_n} instance",
            state.x.len(),
            state.z.len()
        )));
    }
    let delta = inst.delta;

    let mut u = inst.operator.apply_adjoint(&state.z);
    for (ui, xi) in u.iter_mut().zip(&state.x) {
        *ui += xi;
    }
    let mut x = vec![0.0; big_n];
    let mut deriv_sum = 0.0;
    for (xi, &ui) in x.iter_mut().zip(&u) {
        let (e, d) = nl.eta_and_prime(ui, state.theta);
        *xi = e;
        deriv_sum += d;
    }
    let eta_prime_mean = deriv_sum / big_n as f64;

    let ax = inst.operator.apply(&x);
    let memory = if onsager { eta_prime_mean / delta } else { 0.0 };
    let z: Vec<f64> = inst
        .y
        .iter()
        .zip(&ax)
        .zip(&state.z)
        .map(|((y, a), zo)| y - a + memory * zo)
        .collect();

    let sigma_hat = estimate_sigma(&z, n);
    let sigma_hat0 = estimate_sigma(&inst.y, n);
    let t = state.t + 1;
    let diverged = |reason: String| Error::Divergence {
        iteration: t,
        reason,
        trace: None,
    };
    if !sigma_hat.is_finite() || x.iter().any(|v| !v.is_finite()) {
        return Err(diverged("non-finite iterate".into()));
    }
    if sigma_hat > 1e3 * sigma_hat0 {
        return Err(diverged(format!(
            "residual scale {sigma_hat:e} exceeds 1e3 x initial {sigma_hat0:e}"
        )));
    }
    let theta = update_threshold(
        policy,
        &ThresholdInputs {
            t: state.t,
            theta: state.theta,
            sigma_hat_next: sigma_hat,
            eta_prime_mean,
            delta,
            sigma_hat0,
        },
    )
    .map_err(|_| diverged("non-finite threshold".into()))?;

    Ok(AmpState {
        x,
        z,
        theta,
        sigma_hat,
        t,
        eta_prime_mean,
    })
}

/// Empirical observables at one iteration.
///
/// `dr` is the detected fraction of the true support and `mdr = 1 − dr`;
/// `far` is the fraction of true zeros estimated nonzero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableRecord {
    pub t: usize,
    pub mse: f64,
    pub mse_nz: f64,
    pub far: f64,
    pub mdr: f64,
    pub dr: f64,
    pub sigma_hat: f64,
    pub sigma_true: f64,
    pub theta: f64,
    pub eta_prime_mean: f64,
}

impl ObservableRecord {
    pub fn measure(state: &AmpState, inst: &ProblemInstance) -> Self {
        let big_n = inst.big_n();
        let (mut se, mut se_nz) = (0.0, 0.0);
        let (mut support, mut detected, mut zeros, mut alarms) = (0usize, 0usize, 0usize, 0usize);
        for (&x, &s) in state.x.iter().zip(&inst.s0) {
            let e = (x - s) * (x - s);
            se += e;
            if s != 0.0 {
                support += 1;
                se_nz += e;
                detected += usize::from(x != 0.0);
            } else {
                zeros += 1;
                alarms += usize::from(x != 0.0);
            }
        }
        let dr = if support == 0 { 1.0 } else { detected as f64 / support as f64 };
        Self {
            t: state.t,
            mse: se / big_n as f64,
            mse_nz: if support == 0 { 0.0 } else { se_nz / support as f64 },
            far: if zeros == 0 { 0.0 } else { alarms as f64 / zeros as f64 },
            mdr: 1.0 - dr,
            dr,
            sigma_hat: state.sigma_hat,
            sigma_true: effective_variance(&state.x, &inst.s0, inst.v, inst.delta).sqrt(),
            theta: state.theta,
            eta_prime_mean: state.eta_prime_mean,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmpConfig {
    pub nonlinearity: Nonlinearity,
    pub policy: ThresholdPolicy,
    pub onsager: bool,
    pub max_iters: usize,
    /// Stop when `‖x^{t+1} − x^t‖ / max(‖x^t‖, 1e-12) < rel_tol`; 0 runs
    /// exactly `max_iters` iterations.
    pub rel_tol: f64,
}

impl AmpConfig {
    pub fn new(policy: ThresholdPolicy) -> Self {
        Self {
            nonlinearity: Nonlinearity::SoftThreshold,
            policy,
            onsager: true,
            max_iters: 1000,
            rel_tol: 1e-8,
        }
    }
}

/// Records for `t = 0..=iterations`, plus the final iterate.
#[derive(Clone, Debug, PartialEq)]
pub struct AmpTrace {
    pub records: Vec<ObservableRecord>,
    pub final_state: AmpState,
    pub converged: bool,
}

impl AmpTrace {
    pub fn iterations(&self) -> usize {
        self.records.len() - 1
    }
}

pub fn run_amp(inst: &ProblemInstance, cfg: &AmpConfig) -> Result<AmpTrace> {
    if cfg.max_iters == 0 {
        return Err(Error::Parameter("max_iters must be at least 1".into()));
    }
    cfg.policy.validate()?;
    let mut state = AmpState::initial(inst, &cfg.policy);
    let mut records = vec![ObservableRecord::measure(&state, inst)];
    let mut converged = false;
    for _ in 0..cfg.max_iters {
        let next = match amp_step(&state, inst, &cfg.nonlinearity, &cfg.policy, cfg.onsager) {
            Ok(s) => s,
            Err(Error::Divergence { iteration, reason, .. }) => {
                return Err(Error::Divergence {
                    iteration,
                    reason,
                    trace: Some(Box::new(AmpTrace {
                        records,
                        final_state: state,
                        converged: false,
                    })),
                })
            }
            Err(e) => return Err(e),
        };
        records.push(ObservableRecord::measure(&next, inst));
        let change: f64 = next
            .x
            .iter()
            .zip(&state.x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let base = dot(&state.x, &state.x).sqrt().max(1e-12);
        state = next;
        if cfg.rel_tol > 0.0 && change / base < cfg.rel_tol {
            converged = true;
            break;
        }
    }
    Ok(AmpTrace {
        records,
        final_state: state,
        converged,
    })
}
