//! Correspondence between the penalty `λ` of penalized least squares and the
//! threshold multiplier `τ` of the fixed-τ recursion.

use serde::{Deserialize, Serialize};

use super::{equilibrium, state_expectation, Equilibrium, ExpectationEngine, Observable, SEState};
use crate::error::{Error, Result};
use crate::nonlinearity::Nonlinearity;
use crate::signal_model::PriorDistribution;

const SCAN_LO: f64 = 0.05;
const SCAN_HI: f64 = 10.0;
const SCAN_STEP: f64 = 0.05;

fn equilibrium_state(
    tau: f64,
    v: f64,
    delta: f64,
    prior: &PriorDistribution,
    engine: &ExpectationEngine,
) -> Result<(Equilibrium, SEState)> {
    let eq = equilibrium(tau, v, delta, prior, engine)?;
    let state = SEState {
        sigma2: eq.sigma2().max(v),
        v,
        delta,
        theta: eq.theta,
        prior: prior.clone(),
    };
    Ok((eq, state))
}

/// `P{η(U + V + W; θ_∞) ≠ 0}` at the equilibrium of the fixed-τ recursion.
pub fn eq_detection_rate(
    tau: f64,
    v: f64,
    delta: f64,
    prior: &PriorDistribution,
    engine: &ExpectationEngine,
) -> Result<f64> {
    let (_, state) = equilibrium_state(tau, v, delta, prior, engine)?;
    Ok(state_expectation(Observable::Dr, &state, &Nonlinearity::SoftThreshold, engine)?.value)
}

fn lambda_formula(
    tau: f64,
    v: f64,
    delta: f64,
    prior: &PriorDistribution,
    engine: &ExpectationEngine,
) -> Result<f64> {
    let (eq, state) = equilibrium_state(tau, v, delta, prior, engine)?;
    if eq.theta == 0.0 {
        return Ok(0.0);
    }
    let dr = state_expectation(Observable::Dr, &state, &Nonlinearity::SoftThreshold, engine)?.value;
    Ok((1.0 - dr / delta) * eq.theta)
}

/// `λ(τ) = (1 − EqDR(τ)/δ) · θ_∞(τ)`; negative values are out of validity.
pub fn calibrate_lambda(
    tau: f64,
    v: f64,
    delta: f64,
    prior: &PriorDistribution,
    engine: &ExpectationEngine,
) -> Result<f64> {
    let lambda = match lambda_formula(tau, v, delta, prior, engine) {
        // no finite equilibrium: σ∞ and θ∞ blow up with EqDR > δ
        Err(Error::Convergence { last, .. }) if !last.is_finite() => f64::NEG_INFINITY,
        other => other?,
    };
    if lambda < 0.0 {
        return Err(Error::OutOfValidity { tau, lambda });
    }
    Ok(lambda)
}

/// Inverse of [`calibrate_lambda`] on the validity region.
pub fn calibrate_tau(
    lambda: f64,
    v: f64,
    delta: f64,
    prior: &PriorDistribution,
    engine: &ExpectationEngine,
) -> Result<f64> {
    Calibration::new(v, delta, prior, engine)?.tau(lambda)
}

/// Validity region `[tau_lo, tau_hi]` of the calibration for one
/// `(v, δ, F)`, on which `λ(τ)` is nonnegative and nondecreasing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub v: f64,
    pub delta: f64,
    pub prior: PriorDistribution,
    pub engine: ExpectationEngine,
    pub tau_lo: f64,
    pub tau_hi: f64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
}

impl Calibration {
    /// Scans `τ ∈ [0.05, 10]` and keeps the last run of grid points where
    /// `λ ≥ 0` and nondecreasing. The lower end is refined by bisection on
    /// the sign of `λ`.
    pub fn new(v: f64, delta: f64, prior: &PriorDistribution, engine: &ExpectationEngine) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::Parameter(format!("delta = {delta} not in (0, 1]")));
        }
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::Parameter(format!("v = {v} must be finite and >= 0")));
        }
        prior.validate()?;
        let eval = |tau: f64| lambda_formula(tau, v, delta, prior, engine).ok();
        let steps = ((SCAN_HI - SCAN_LO) / SCAN_STEP).round() as usize;
        let taus: Vec<f64> = (0..=steps).map(|k| SCAN_LO + k as f64 * SCAN_STEP).collect();
        // walk down from the top; points below the first break are never needed
        let mut lambdas: Vec<Option<f64>> = vec![None; taus.len()];
        let last = taus.len() - 1;
        lambdas[last] = eval(taus[last]);
        if !matches!(lambdas[last], Some(l) if l >= 0.0) {
            return Err(Error::Config(format!(
                "calibration has no validity region below tau = {SCAN_HI}"
            )));
        }
        let mut first = last;
        while first > 0 {
            lambdas[first - 1] = eval(taus[first - 1]);
            match (lambdas[first - 1], lambdas[first]) {
                (Some(l), Some(r)) if l >= 0.0 && l <= r => first -= 1,
                _ => break,
            }
        }

        let (mut tau_lo, mut lambda_lo) = (taus[first], lambdas[first].unwrap_or(0.0));
        if first > 0 && !matches!(lambdas[first - 1], Some(l) if l >= 0.0) {
            let (mut lo, mut hi) = (taus[first - 1], taus[first]);
            while hi - lo > 1e-10 {
                let mid = 0.5 * (lo + hi);
                match eval(mid) {
                    Some(l) if l >= 0.0 && l <= lambda_lo => {
                        hi = mid;
                        tau_lo = mid;
                        lambda_lo = l;
                    }
                    _ => lo = mid,
                }
            }
        }
        Ok(Self {
            v,
            delta,
            prior: prior.clone(),
            engine: *engine,
            tau_lo,
            tau_hi: taus[last],
            lambda_lo,
            lambda_hi: lambdas[last].unwrap_or(0.0),
        })
    }

    pub fn contains_tau(&self, tau: f64) -> bool {
        tau >= self.tau_lo && tau <= self.tau_hi
    }

    /// `λ(τ)` for `τ` in the validity region.
    pub fn lambda(&self, tau: f64) -> Result<f64> {
        if !self.contains_tau(tau) {
            let lambda = lambda_formula(tau, self.v, self.delta, &self.prior, &self.engine)?;
            return Err(Error::OutOfValidity { tau, lambda });
        }
        calibrate_lambda(tau, self.v, self.delta, &self.prior, &self.engine)
    }

    /// Smallest `τ` in the validity region with `λ(τ) ≥ lambda`, by bisection
    /// to 1e-9.
    pub fn tau(&self, lambda: f64) -> Result<f64> {
        if !(lambda >= self.lambda_lo && lambda <= self.lambda_hi) {
            return Err(Error::Range {
                value: lambda,
                lo: self.lambda_lo,
                hi: self.lambda_hi,
            });
        }
        if lambda == self.lambda_lo {
            return Ok(self.tau_lo);
        }
        let (mut lo, mut hi) = (self.tau_lo, self.tau_hi);
        while hi - lo > 1e-9 {
            let mid = 0.5 * (lo + hi);
            if lambda_formula(mid, self.v, self.delta, &self.prior, &self.engine)? >= lambda {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}
