use serde::{Deserialize, Serialize};

use super::{proportional_psi, ExpectationEngine};
use crate::error::{Error, Result};
use crate::nonlinearity::Nonlinearity;
use crate::signal_model::PriorDistribution;

/// Highest fixed point `sup{m : Ψ(m) ≥ m}` on a search interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub value: f64,
    /// `Ψ(m) ≥ m` held at the top of the search interval, so the true
    /// highest fixed point may lie beyond it.
    pub saturated: bool,
}

const LINEAR_POINTS: usize = 256;
const LOG_POINTS: usize = 192;
const LOG_DECADES: f64 = 14.0;

/// Grid scan of `Ψ(m) − m` on `[0, search_upper]`, refined by bisection.
///
/// The grid is the union of a uniform grid and a geometric grid reaching
/// 14 decades below `search_upper`, so fixed points of maps that are
/// linear near the origin are resolved.
pub fn hfp<F: Fn(f64) -> f64>(psi: F, search_upper: f64) -> FixedPoint {
    let fp = hfp_quiet(psi, search_upper);
    if fp.saturated {
        log::warn!("highest fixed point saturates the search interval [0, {search_upper}]");
    }
    fp
}

/// [`hfp`] without the saturation warning, for searches where saturation
/// is an expected outcome.
pub(crate) fn hfp_quiet<F: Fn(f64) -> f64>(psi: F, search_upper: f64) -> FixedPoint {
    assert!(search_upper > 0.0 && search_upper.is_finite());
    let mut grid: Vec<f64> = (1..=LINEAR_POINTS)
        .map(|k| search_upper * k as f64 / LINEAR_POINTS as f64)
        .chain((0..LOG_POINTS).map(|k| {
            search_upper * 10f64.powf(-LOG_DECADES * (1.0 - k as f64 / LOG_POINTS as f64))
        }))
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let above = |m: f64| psi(m) >= m;
    if above(search_upper) {
        return FixedPoint {
            value: search_upper,
            saturated: true,
        };
    }
    let Some(i) = grid.iter().rposition(|&m| above(m)) else {
        return FixedPoint {
            value: 0.0,
            saturated: false,
        };
    };
    let (mut lo, mut hi) = (grid[i], grid[i + 1]);
    while hi - lo > 1e-10 && hi - lo > 4.0 * f64::EPSILON * hi {
        let mid = 0.5 * (lo + hi);
        if above(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    FixedPoint {
        value: lo,
        saturated: false,
    }
}

/// `dΨ/dm` at the fixed point: central difference, one-sided at 0.
pub fn stability_coefficient<F: Fn(f64) -> f64>(psi: F, hfp_value: f64) -> f64 {
    let h = (1e-6f64).max(1e-6 * hfp_value);
    if hfp_value <= 0.0 || hfp_value < h {
        (psi(hfp_value + h) - psi(hfp_value)) / h
    } else {
        (psi(hfp_value + h) - psi(hfp_value - h)) / (2.0 * h)
    }
}

/// Large-`t` state of the fixed-τ soft-threshold recursion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub sigma: f64,
    pub theta: f64,
    pub iterations: usize,
}

impl Equilibrium {
    pub fn sigma2(&self) -> f64 {
        self.sigma * self.sigma
    }
}

pub const EQUILIBRIUM_MAX_ITERS: usize = 100_000;

/// Iterates `σ² ← Ψ(σ²)` with `θ = τσ` from `σ²_0 = v + μ₂/δ` until
/// `|Δσ²| < 1e-12 · max(σ², 1)`. Without noise, a zero highest fixed point
/// is returned exactly rather than approached.
pub fn equilibrium(
    tau: f64,
    v: f64,
    delta: f64,
    prior: &PriorDistribution,
    engine: &ExpectationEngine,
) -> Result<Equilibrium> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Parameter(format!("tau = {tau} must be > 0")));
    }
    if matches!(engine, ExpectationEngine::MonteCarlo { .. }) {
        return Err(Error::Capability(
            "equilibrium iteration needs a deterministic engine".into(),
        ));
    }
    let nl = Nonlinearity::SoftThreshold;
    let map = proportional_psi(tau, v, delta, prior, &nl, engine)?;
    let mut m = v + prior.second_moment() / delta;
    // without an atom at zero, Ψ(m)/m stays above (1 + τ²)/δ > 1 near 0
    if v == 0.0 && (m == 0.0 || (prior.mass_at_zero() > 0.0 && hfp_quiet(&map, 4.0 * m).value == 0.0)) {
        return Ok(Equilibrium {
            sigma: 0.0,
            theta: 0.0,
            iterations: 0,
        });
    }
    for it in 1..=EQUILIBRIUM_MAX_ITERS {
        let next = map(m);
        if !next.is_finite() {
            // Ψ(m) > m for all large m: no finite equilibrium
            return Err(Error::Convergence {
                iterations: it,
                last: next,
            });
        }
        let done = (next - m).abs() < 1e-12 * next.max(1.0);
        m = next;
        if done {
            let sigma = m.sqrt();
            return Ok(Equilibrium {
                sigma,
                theta: tau * sigma,
                iterations: it,
            });
        }
    }
    Err(Error::Convergence {
        iterations: EQUILIBRIUM_MAX_ITERS,
        last: m,
    })
}
