use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentKind};
use crate::amp::{run_amp, AmpConfig, ObservableRecord};
use crate::error::{Error, Result};
use crate::nonlinearity::Nonlinearity;
use crate::par::map_range;
use crate::rng::derive_seed;
use crate::signal_model::{generate_instance, PriorDistribution};
use crate::special::median;
use crate::state_evolution::{evolve, state_expectation, Observable, SEState};

/// Median empirical curves next to their predictions, one row per
/// iteration. Empirical record `t` is paired with the prediction from the
/// state that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservablesRow {
    pub t: usize,
    /// Instances contributing to the medians.
    pub instances: usize,
    pub mse: f64,
    pub mse_nz: f64,
    pub mdr: f64,
    pub far: f64,
    pub dr: f64,
    pub se_mse: f64,
    pub se_mse_nz: f64,
    pub se_mdr: f64,
    pub se_far: f64,
    pub se_dr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceCurveRow {
    pub instance: usize,
    pub t: usize,
    pub mse: f64,
    pub mse_nz: f64,
    pub mdr: f64,
    pub far: f64,
    pub dr: f64,
    pub theta: f64,
    pub sigma_hat: f64,
    pub diverged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservablesReport {
    pub delta: f64,
    pub rho: f64,
    pub curves: Vec<ObservablesRow>,
    pub per_instance: Vec<InstanceCurveRow>,
    pub completed: usize,
    pub diverged: usize,
    /// `σ²_t` of the predicted trajectory, `t = 0..=max_iters`.
    pub se_sigma2: Vec<f64>,
}

struct Prediction {
    mse: f64,
    mse_nz: f64,
    mdr: f64,
    far: f64,
    dr: f64,
}

fn predict(cfg: &ExperimentConfig, prior: &PriorDistribution, delta: f64) -> Result<(Vec<Prediction>, Vec<f64>)> {
    let policy = cfg.policy(delta)?;
    let nl = Nonlinearity::SoftThreshold;
    let start = SEState::initial(prior.clone(), cfg.noise_variance, delta, 0.0);
    let states = evolve(&start, &policy, cfg.max_iters, &nl, &cfg.engine)?;
    let nz = prior.nonzero_part();
    let mut out = vec![Prediction {
        mse: prior.second_moment(),
        mse_nz: nz.as_ref().map_or(0.0, |p| p.second_moment()),
        mdr: if nz.is_some() { 1.0 } else { 0.0 },
        far: 0.0,
        dr: if nz.is_some() { 0.0 } else { 1.0 },
    }];
    for s in &states[..cfg.max_iters] {
        let e = |obs| state_expectation(obs, s, &nl, &cfg.engine).map(|e| e.value);
        let mdr = e(Observable::Mdr)?;
        out.push(Prediction {
            mse: e(Observable::Mse)?,
            mse_nz: e(Observable::MseNz)?,
            mdr,
            far: e(Observable::Far)?,
            dr: if nz.is_some() { 1.0 - mdr } else { 1.0 },
        });
    }
    Ok((out, states.iter().map(|s| s.sigma2).collect()))
}

/// AMP observables per iteration on `instances` random instances with
/// `F = (1 − ε)δ_0 + ε δ_amplitude`, `ε = ρδ`, at the first `δ` and `ρ` of
/// the grid.
pub fn run_observables(cfg: &ExperimentConfig) -> Result<ObservablesReport> {
    if cfg.experiment != ExperimentKind::Observables {
        return Err(Error::Config("run_observables needs an observables config".into()));
    }
    cfg.validate()?;
    let (delta, rho) = (cfg.deltas[0], cfg.rhos[0]);
    let prior = PriorDistribution::sparse(rho * delta, cfg.amplitude)?;
    let (pred, se_sigma2) = predict(cfg, &prior, delta)?;
    let amp_cfg = AmpConfig {
        onsager: cfg.onsager,
        max_iters: cfg.max_iters,
        rel_tol: 0.0,
        ..AmpConfig::new(cfg.policy(delta)?)
    };

    let runs: Vec<Result<(Vec<ObservableRecord>, bool)>> = map_range(cfg.parallelism, cfg.instances, |i| {
        let seed = derive_seed(cfg.master_seed, &[0, 0, i as u64]);
        let inst = generate_instance(&prior, delta, cfg.n, cfg.noise_variance, cfg.operator, seed)?;
        match run_amp(&inst, &amp_cfg) {
            Ok(trace) => Ok((trace.records, false)),
            Err(Error::Divergence { trace, .. }) => Ok((trace.map(|t| t.records).unwrap_or_default(), true)),
            Err(e) => Err(e),
        }
    });

    let mut per_instance = Vec::new();
    let mut complete: Vec<Vec<ObservableRecord>> = Vec::new();
    let mut diverged = 0;
    for (i, run) in runs.into_iter().enumerate() {
        let (records, div) = run?;
        if div {
            log::warn!("instance {i} diverged after {} iterations", records.len().saturating_sub(1));
            diverged += 1;
        }
        for r in &records {
            per_instance.push(InstanceCurveRow {
                instance: i,
                t: r.t,
                mse: r.mse,
                mse_nz: r.mse_nz,
                mdr: r.mdr,
                far: r.far,
                dr: r.dr,
                theta: r.theta,
                sigma_hat: r.sigma_hat,
                diverged: div,
            });
        }
        if !div {
            complete.push(records);
        }
    }

    let curves = (0..=cfg.max_iters)
        .map(|t| {
            let col = |f: fn(&ObservableRecord) -> f64| -> f64 {
                median(&complete.iter().map(|rs| f(&rs[t])).collect::<Vec<_>>())
            };
            let p = &pred[t];
            ObservablesRow {
                t,
                instances: complete.len(),
                mse: col(|r| r.mse),
                mse_nz: col(|r| r.mse_nz),
                mdr: col(|r| r.mdr),
                far: col(|r| r.far),
                dr: col(|r| r.dr),
                se_mse: p.mse,
                se_mse_nz: p.mse_nz,
                se_mdr: p.mdr,
                se_far: p.far,
                se_dr: p.dr,
            }
        })
        .collect();

    Ok(ObservablesReport {
        delta,
        rho,
        curves,
        per_instance,
        completed: complete.len(),
        diverged,
        se_sigma2,
    })
}
