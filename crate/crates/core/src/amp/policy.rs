use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometric decay `λ_t = initial · decay^t`. `initial = None` resolves to
/// a tenth of the initial residual scale `‖y‖ / √n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaSchedule {
    pub initial: Option<f64>,
    pub decay: f64,
}

impl Default for LambdaSchedule {
    fn default() -> Self {
        Self {
            initial: None,
            decay: 0.9,
        }
    }
}

impl LambdaSchedule {
    pub fn at(&self, t: usize, sigma_hat0: f64) -> f64 {
        let initial = self.initial.unwrap_or(0.1 * sigma_hat0);
        initial * self.decay.powi(t.min(i32::MAX as usize) as i32)
    }
}

/// How the threshold `θ_t` is chosen at each iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThresholdPolicy {
    /// `θ_t = τ(δ) σ̂_t` with the minimax `τ(δ)`.
    MinimaxM { tau_of_delta: f64 },
    /// `θ_t = τ σ̂_t`.
    FixedT { tau: f64 },
    /// Floating threshold targeting the ℓ1-penalized least-squares solution.
    LassoA { lambda: f64 },
    /// Floating threshold with `λ_t ↓ 0` (basis pursuit limit).
    ZeroBp { schedule: LambdaSchedule },
}

impl ThresholdPolicy {
    /// `MinimaxM` with `τ(δ)` computed by state evolution.
    pub fn minimax(delta: f64) -> Result<Self> {
        Ok(ThresholdPolicy::MinimaxM {
            tau_of_delta: crate::state_evolution::minimax_tau(delta)?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ThresholdPolicy::MinimaxM { tau_of_delta: tau } | ThresholdPolicy::FixedT { tau } => {
                tau > 0.0 && tau.is_finite()
            }
            ThresholdPolicy::LassoA { lambda } => lambda >= 0.0 && lambda.is_finite(),
            ThresholdPolicy::ZeroBp { schedule } => {
                schedule.initial.is_none_or(|l| l >= 0.0 && l.is_finite())
                    && (0.0..1.0).contains(&schedule.decay)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!("invalid threshold policy {self:?}")))
        }
    }

    /// The multiplier `τ` for the proportional policies.
    pub fn tau(&self) -> Option<f64> {
        match *self {
            ThresholdPolicy::MinimaxM { tau_of_delta } => Some(tau_of_delta),
            ThresholdPolicy::FixedT { tau } => Some(tau),
            _ => None,
        }
    }

    /// Threshold used at `t = 0`.
    pub fn initial_theta(&self, sigma_hat0: f64) -> f64 {
        match *self {
            ThresholdPolicy::MinimaxM { tau_of_delta: tau } | ThresholdPolicy::FixedT { tau } => tau * sigma_hat0,
            // start from the proportional rule with a conservative multiplier; the
            // recursion then floats to its own fixed point
            ThresholdPolicy::LassoA { lambda } => lambda.max(2.0 * sigma_hat0),
            ThresholdPolicy::ZeroBp { .. } => 2.0 * sigma_hat0,
        }
    }
}

/// Quantities the threshold update reads.
#[derive(Clone, Copy, Debug)]
pub struct ThresholdInputs {
    /// Iteration index of the threshold being replaced.
    pub t: usize,
    pub theta: f64,
    /// `σ̂_{t+1}`, from the freshly updated residual.
    pub sigma_hat_next: f64,
    /// `⟨η'(x^t + A* z^t; θ_t)⟩`.
    pub eta_prime_mean: f64,
    pub delta: f64,
    pub sigma_hat0: f64,
}

/// `θ_{t+1}` for `policy`.
pub fn update_threshold(policy: &ThresholdPolicy, input: &ThresholdInputs) -> Result<f64> {
    let next = match *policy {
        ThresholdPolicy::MinimaxM { tau_of_delta: tau } | ThresholdPolicy::FixedT { tau } => {
            tau * input.sigma_hat_next
        }
        ThresholdPolicy::LassoA { lambda } => {
            lambda + input.theta / input.delta * input.eta_prime_mean
        }
        ThresholdPolicy::ZeroBp { schedule } => {
            schedule.at(input.t, input.sigma_hat0) + input.theta / input.delta * input.eta_prime_mean
        }
    };
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::Divergence {
            iteration: input.t + 1,
            reason: format!("threshold became {next}"),
            trace: None,
        })
    }
}
