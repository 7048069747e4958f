use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentKind};
use crate::error::{Error, Result};
use crate::lasso::solve_lasso;
use crate::nonlinearity::Nonlinearity;
use crate::par::map_range;
use crate::rng::derive_seed;
use crate::signal_model::{generate_instance, PriorDistribution};
use crate::special::median;
use crate::state_evolution::{equilibrium, state_expectation, Calibration, Observable, SEState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingCharsRow {
    pub alpha: f64,
    pub delta: f64,
    pub lambda: f64,
    /// Calibrated threshold multiplier; empty when unavailable.
    pub tau: Option<f64>,
    pub prediction_available: bool,
    pub se_mse: Option<f64>,
    pub median_mse: f64,
    /// `|median − predicted| / predicted`.
    pub rel_error: Option<f64>,
    pub instances: usize,
    /// Solves that reached the KKT tolerance; the median uses only these.
    pub completed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingCharsReport {
    pub rows: Vec<OperatingCharsRow>,
    /// Validity region of each `(α, δ)` cell, in grid order; empty when
    /// the calibration failed.
    pub calibrations: Vec<Option<Calibration>>,
}

struct Cell {
    alpha: f64,
    delta: f64,
    prior: PriorDistribution,
    /// `(λ, τ(λ), predicted MSE)`.
    lambdas: Vec<(f64, Option<f64>, Option<f64>)>,
}

fn predicted_mse(cfg: &ExperimentConfig, cal: &Calibration, tau: f64) -> Result<f64> {
    let eq = equilibrium(tau, cal.v, cal.delta, &cal.prior, &cfg.engine)?;
    let state = SEState {
        sigma2: eq.sigma2().max(cal.v),
        v: cal.v,
        delta: cal.delta,
        theta: eq.theta,
        prior: cal.prior.clone(),
    };
    Ok(state_expectation(Observable::Mse, &state, &Nonlinearity::SoftThreshold, &cfg.engine)?.value)
}

fn plan_cell(cfg: &ExperimentConfig, alpha: f64, delta: f64) -> Result<(Cell, Option<Calibration>)> {
    let prior = PriorDistribution::generalized_gaussian(alpha, 1.0)?;
    let cal = match Calibration::new(cfg.noise_variance, delta, &prior, &cfg.engine) {
        Ok(c) => Some(c),
        Err(e) => {
            log::warn!("no calibration for alpha = {alpha}, delta = {delta}: {e}");
            None
        }
    };
    let mut lambdas = Vec::new();
    match &cal {
        Some(cal) if cfg.lambdas.is_empty() => {
            // spread over the lower part of the region, where λ varies most
            let hi = cal.tau_hi.min(cal.tau_lo + 3.0);
            let m = cfg.lambdas_per_cell;
            for j in 0..m {
                let tau = cal.tau_lo + (j as f64 + 1.0) / (m as f64 + 1.0) * (hi - cal.tau_lo);
                let lambda = cal.lambda(tau)?;
                lambdas.push((lambda, Some(tau), Some(predicted_mse(cfg, cal, tau)?)));
            }
        }
        Some(cal) => {
            for &lambda in &cfg.lambdas {
                match cal.tau(lambda) {
                    Ok(tau) => lambdas.push((lambda, Some(tau), Some(predicted_mse(cfg, cal, tau)?))),
                    Err(Error::Range { .. }) => lambdas.push((lambda, None, None)),
                    Err(e) => return Err(e),
                }
            }
        }
        None => lambdas.extend(cfg.lambdas.iter().map(|&l| (l, None, None))),
    }
    Ok((
        Cell {
            alpha,
            delta,
            prior,
            lambdas,
        },
        cal,
    ))
}

/// Median penalized least-squares MSE against the calibrated prediction
/// over the `(α, δ, λ)` grid, for generalized Gaussian signals.
pub fn run_operating_chars(cfg: &ExperimentConfig) -> Result<OperatingCharsReport> {
    if cfg.experiment != ExperimentKind::OperatingChars {
        return Err(Error::Config("run_operating_chars needs an operating_chars config".into()));
    }
    cfg.validate()?;
    let pairs: Vec<(f64, f64)> = cfg
        .alphas
        .iter()
        .flat_map(|&a| cfg.deltas.iter().map(move |&d| (a, d)))
        .collect();
    let planned = map_range(cfg.parallelism, pairs.len(), |c| plan_cell(cfg, pairs[c].0, pairs[c].1));
    let mut cells = Vec::new();
    let mut calibrations = Vec::new();
    for p in planned {
        let (cell, cal) = p?;
        cells.push(cell);
        calibrations.push(cal);
    }

    let ni = cfg.instances;
    let nd = cfg.deltas.len();
    // one instance per (cell, replicate), shared by every λ of the cell
    let results = map_range(cfg.parallelism, cells.len() * ni, |job| -> Result<Vec<Option<f64>>> {
        let (c, i) = (job / ni, job % ni);
        let cell = &cells[c];
        let seed = derive_seed(cfg.master_seed, &[(c / nd) as u64, (c % nd) as u64, i as u64]);
        let inst = generate_instance(&cell.prior, cell.delta, cfg.n, cfg.noise_variance, cfg.operator, seed)?;
        cell.lambdas
            .iter()
            .map(|&(lambda, _, _)| match solve_lasso(&inst, lambda, cfg.lasso_tol, cfg.lasso_max_sweeps) {
                Ok(sol) => {
                    let err: f64 = sol.x_hat.iter().zip(&inst.s0).map(|(a, b)| (a - b).powi(2)).sum();
                    Ok(Some(err / cfg.n as f64))
                }
                Err(Error::LassoNonConvergence { kkt_residual, .. }) => {
                    log::warn!("lasso did not converge (kkt {kkt_residual:e}) at lambda = {lambda}");
                    Ok(None)
                }
                Err(Error::Underdetermined { .. }) => Ok(None),
                Err(e) => Err(e),
            })
            .collect()
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (c, cell) in cells.iter().enumerate() {
        for (l, &(lambda, tau, se_mse)) in cell.lambdas.iter().enumerate() {
            let mses: Vec<f64> = (0..ni).filter_map(|i| results[c * ni + i][l]).collect();
            let median_mse = median(&mses);
            rows.push(OperatingCharsRow {
                alpha: cell.alpha,
                delta: cell.delta,
                lambda,
                tau,
                prediction_available: se_mse.is_some(),
                se_mse,
                median_mse,
                rel_error: se_mse.map(|p| (median_mse - p).abs() / p),
                instances: ni,
                completed: mses.len(),
            });
        }
    }
    Ok(OperatingCharsReport { rows, calibrations })
}
