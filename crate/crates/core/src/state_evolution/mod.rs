//! State evolution: the scalar recursion `σ²_{t+1} = Ψ(σ²_t)` that predicts
//! AMP observables, its fixed points, the minimax threshold and phase
//! transition, and the λ ↔ τ calibration with penalized least squares.

mod calibration;
mod expectation;
mod fixed_point;
mod minimax;

pub use calibration::{calibrate_lambda, calibrate_tau, eq_detection_rate, Calibration};
pub use expectation::{CustomObservable, Estimate, ExpectationEngine};
pub use fixed_point::{equilibrium, hfp, stability_coefficient, Equilibrium, FixedPoint};
pub use minimax::{
    minimax_tau, se_phase_transition, transition_point, TransitionPoint, LEAST_FAVORABLE_AMPLITUDE,
};

use serde::{Deserialize, Serialize};

use crate::amp::ThresholdPolicy;
use crate::error::{Error, Result};
use crate::nonlinearity::Nonlinearity;
use crate::signal_model::PriorDistribution;
use expectation::{expect_custom, expect_kernel, Kernel};

/// `(σ²; v, δ, θ, F)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SEState {
    pub sigma2: f64,
    pub v: f64,
    pub delta: f64,
    pub theta: f64,
    pub prior: PriorDistribution,
}

impl SEState {
    /// Starting state `σ²_0 = v + μ₂(F)/δ`, the large-N value of
    /// `v + ‖s0‖²/(Nδ)`.
    pub fn initial(prior: PriorDistribution, v: f64, delta: f64, theta: f64) -> Self {
        Self {
            sigma2: v + prior.second_moment() / delta,
            v,
            delta,
            theta,
            prior,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }
}

/// Quantity whose state-conditional expectation is requested.
#[derive(Clone, Copy)]
pub enum Observable<'a> {
    /// `(u − x)²`
    Mse,
    /// `(u − x)²` conditioned on `U ≠ 0` (0 when `U = 0` a.s.).
    MseNz,
    /// `1{η(v + w) ≠ 0}`
    Far,
    /// `1{η(u + v + w) = 0}` conditioned on `U ≠ 0` (0 when `U = 0` a.s.).
    Mdr,
    /// `1{η(u + v + w) ≠ 0}`
    Dr,
    /// `η'(u + v + w)`
    EtaPrime,
    Custom(CustomObservable<'a>),
}

fn check_args(sigma2: f64, theta: f64, delta: f64) -> Result<()> {
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::Parameter(format!("sigma2 = {sigma2} must be finite and >= 0")));
    }
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::Parameter(format!("theta = {theta} must be finite and >= 0")));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Parameter(format!("delta = {delta} not in (0, 1]")));
    }
    Ok(())
}

/// `Ψ(σ²) = v + E[(η(X + σZ; θ) − X)²] / δ`, with its standard error.
#[allow(clippy::too_many_arguments)]
pub fn psi_estimate(
    sigma2: f64,
    v: f64,
    delta: f64,
    theta: f64,
    prior: &PriorDistribution,
    nl: &Nonlinearity,
    engine: &ExpectationEngine,
) -> Result<Estimate> {
    check_args(sigma2, theta, delta)?;
    let e = expect_kernel(Kernel::SquaredError, prior, sigma2.sqrt(), theta, nl, engine)?;
    Ok(Estimate {
        value: v + e.value / delta,
        std_error: e.std_error / delta,
    })
}

/// The MSE map `Ψ`.
pub fn psi(
    sigma2: f64,
    v: f64,
    delta: f64,
    theta: f64,
    prior: &PriorDistribution,
    nl: &Nonlinearity,
    engine: &ExpectationEngine,
) -> Result<f64> {
    psi_estimate(sigma2, v, delta, theta, prior, nl, engine).map(|e| e.value)
}

/// `ℰ(ζ | S)` for a named or custom observable.
pub fn state_expectation(
    obs: Observable<'_>,
    state: &SEState,
    nl: &Nonlinearity,
    engine: &ExpectationEngine,
) -> Result<Estimate> {
    check_args(state.sigma2, state.theta, state.delta)?;
    if state.sigma2 + 1e-15 * state.v.max(1.0) < state.v {
        return Err(Error::Parameter(format!(
            "sigma2 = {} below noise variance {}",
            state.sigma2, state.v
        )));
    }
    let sigma = state.sigma2.sqrt();
    let theta = state.theta;
    let conditional = |kernel: Kernel| -> Result<Estimate> {
        match state.prior.nonzero_part() {
            Some(nz) => expect_kernel(kernel, &nz, sigma, theta, nl, engine),
            None => Ok(Estimate::exact(0.0)),
        }
    };
    match obs {
        Observable::Mse => expect_kernel(Kernel::SquaredError, &state.prior, sigma, theta, nl, engine),
        Observable::Dr => expect_kernel(Kernel::Nonzero, &state.prior, sigma, theta, nl, engine),
        Observable::EtaPrime => expect_kernel(Kernel::Slope, &state.prior, sigma, theta, nl, engine),
        Observable::Far => expect_kernel(Kernel::Nonzero, &PriorDistribution::zero(), sigma, theta, nl, engine),
        Observable::MseNz => conditional(Kernel::SquaredError),
        Observable::Mdr => conditional(Kernel::Zero),
        Observable::Custom(zeta) => expect_custom(zeta, &state.prior, state.v, state.sigma2, theta, nl, engine),
    }
}

/// Iterates `steps` updates of `Ψ` and the threshold rule; returns
/// `steps + 1` states starting with `initial`. Proportional policies use
/// `θ_t = τ σ_t`, overriding `initial.theta`.
pub fn evolve(
    initial: &SEState,
    policy: &ThresholdPolicy,
    steps: usize,
    nl: &Nonlinearity,
    engine: &ExpectationEngine,
) -> Result<Vec<SEState>> {
    if steps == 0 {
        return Err(Error::Parameter("evolve needs at least one step".into()));
    }
    policy.validate()?;
    let sigma0 = initial.sigma();
    let mut state = initial.clone();
    if let Some(tau) = policy.tau() {
        state.theta = tau * sigma0;
    }
    let mut out = Vec::with_capacity(steps + 1);
    out.push(state.clone());
    for t in 0..steps {
        let sigma2 = psi(state.sigma2, state.v, state.delta, state.theta, &state.prior, nl, engine)?;
        let theta = match *policy {
            ThresholdPolicy::MinimaxM { tau_of_delta: tau } | ThresholdPolicy::FixedT { tau } => tau * sigma2.sqrt(),
            ThresholdPolicy::LassoA { lambda } => lambda + floating_increment(&state, nl, engine)?,
            ThresholdPolicy::ZeroBp { schedule } => {
                schedule.at(t, sigma0) + floating_increment(&state, nl, engine)?
            }
        };
        state.sigma2 = sigma2;
        state.theta = theta;
        out.push(state.clone());
    }
    Ok(out)
}

/// `(θ/δ) E η'(X + σZ; θ)`.
fn floating_increment(state: &SEState, nl: &Nonlinearity, engine: &ExpectationEngine) -> Result<f64> {
    let slope = state_expectation(Observable::EtaPrime, state, nl, engine)?.value;
    Ok(state.theta / state.delta * slope)
}

/// `m ↦ Ψ(m)` for the proportional rule `θ = τ √m`. Validates the
/// engine/denoiser pair once.
pub fn proportional_psi<'a>(
    tau: f64,
    v: f64,
    delta: f64,
    prior: &'a PriorDistribution,
    nl: &'a Nonlinearity,
    engine: &'a ExpectationEngine,
) -> Result<impl Fn(f64) -> f64 + 'a> {
    psi(1.0, v, delta, tau, prior, nl, engine)?;
    Ok(move |m: f64| {
        let m = m.max(0.0);
        psi(m, v, delta, tau * m.sqrt(), prior, nl, engine).expect("validated engine")
    })
}
