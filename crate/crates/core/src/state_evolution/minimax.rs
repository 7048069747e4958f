//! Minimax threshold `τ(δ)` and the state-evolution phase transition
//! `ρ_SE(δ)`, both computed from the least-favorable sparse prior
//! `(1 − ε)δ_0 + (ε/2)(δ_μ + δ_{−μ})` at large amplitude `μ`.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use super::fixed_point::hfp_quiet;
use super::{proportional_psi, ExpectationEngine};
use crate::error::{Error, Result};
use crate::nonlinearity::Nonlinearity;
use crate::signal_model::PriorDistribution;

/// Stand-in for `μ → ∞`, in units of the unit noise scale.
pub const LEAST_FAVORABLE_AMPLITUDE: f64 = 1e3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionPoint {
    pub delta: f64,
    /// `ρ_SE(δ)`.
    pub rho: f64,
    /// Threshold multiplier achieving it.
    pub tau: f64,
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("delta = {delta} not in (0, 1)")))
    }
}

/// True when the highest fixed point of the noiseless proportional-threshold
/// map is 0 for the least-favorable prior with `ε = ρδ`.
fn recovers(delta: f64, rho: f64, tau: f64, amplitude: f64) -> bool {
    let eps = rho * delta;
    let prior = PriorDistribution::symmetric_three_point(eps, amplitude).expect("eps in [0, 1]");
    let nl = Nonlinearity::SoftThreshold;
    let engine = ExpectationEngine::ClosedForm;
    let map = proportional_psi(tau, 0.0, delta, &prior, &nl, &engine).expect("closed form supported");
    let upper = 4.0 * prior.second_moment() / delta;
    let upper = if upper > 0.0 { upper } else { 1.0 };
    hfp_quiet(map, upper).value == 0.0
}

/// Largest `ρ` recovered at threshold multiplier `tau` (bisection, 1e-9).
fn rho_at_tau(delta: f64, tau: f64, amplitude: f64) -> f64 {
    if !recovers(delta, 1e-12, tau, amplitude) {
        return 0.0;
    }
    if recovers(delta, 1.0, tau, amplitude) {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if recovers(delta, mid, tau, amplitude) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Maximizes `rho_at_tau` over `τ`: coarse scan, then golden section.
pub fn transition_point(delta: f64, amplitude: f64) -> Result<TransitionPoint> {
    check_delta(delta)?;
    let key = (delta.to_bits(), amplitude.to_bits());
    static CACHE: OnceLock<Mutex<HashMap<(u64, u64), TransitionPoint>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(tp) = cache.lock().expect("cache lock").get(&key) {
        return Ok(*tp);
    }

    let f = |tau: f64| rho_at_tau(delta, tau, amplitude);
    let step = 0.1;
    let (mut best_tau, mut best_rho) = (step, f(step));
    let mut tau = 2.0 * step;
    while tau <= 6.0 + 1e-9 {
        let r = f(tau);
        if r > best_rho {
            best_rho = r;
            best_tau = tau;
        }
        tau += step;
    }
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = ((best_tau - step).max(1e-3), best_tau + step);
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-7 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
    }
    let tau = 0.5 * (a + b);
    let rho = f(tau);
    let tp = if rho >= best_rho {
        TransitionPoint { delta, rho, tau }
    } else {
        TransitionPoint {
            delta,
            rho: best_rho,
            tau: best_tau,
        }
    };
    cache.lock().expect("cache lock").insert(key, tp);
    Ok(tp)
}

/// Minimax threshold multiplier `τ(δ)`.
pub fn minimax_tau(delta: f64) -> Result<f64> {
    Ok(transition_point(delta, LEAST_FAVORABLE_AMPLITUDE)?.tau)
}

/// Phase transition `ρ_SE(δ)` of the minimax-thresholded recursion.
pub fn se_phase_transition(delta: f64) -> Result<f64> {
    Ok(transition_point(delta, LEAST_FAVORABLE_AMPLITUDE)?.rho)
}
