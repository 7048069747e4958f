use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentKind};
use crate::amp::{run_amp, AmpConfig};
use crate::error::{Error, Result};
use crate::par::map_range;
use crate::rng::derive_seed;
use crate::signal_model::{generate_k_sparse_instance, measurement_count};
use crate::special::median;
use crate::state_evolution::se_phase_transition;

/// Relative errors at which success fractions are also reported, to show
/// the crossover does not hinge on the tolerance.
const SENSITIVITY_TOLS: [f64; 2] = [1e-2, 1e-4];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PtInstanceRow {
    pub delta: f64,
    pub rho: f64,
    pub algorithm: String,
    pub instance: usize,
    /// `‖x̂ − s0‖ / ‖s0‖`, infinite after divergence.
    pub rel_err: f64,
    pub iterations: usize,
    pub diverged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PtCellRow {
    pub delta: f64,
    pub rho: f64,
    pub k: usize,
    pub algorithm: String,
    pub instances: usize,
    pub successes: usize,
    pub success_fraction: f64,
    pub success_fraction_tol_1e2: f64,
    pub success_fraction_tol_1e4: f64,
    pub diverged: usize,
    pub median_rel_err: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PtSummaryRow {
    pub delta: f64,
    pub rho_se: f64,
    /// 50% crossing of the success fraction; empty when it never drops
    /// below one half on the grid.
    pub amp_crossover: Option<f64>,
    pub ist_crossover: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseTransitionReport {
    pub cells: Vec<PtCellRow>,
    pub summary: Vec<PtSummaryRow>,
    pub per_instance: Vec<PtInstanceRow>,
}

/// First `ρ` where `fraction` falls below 1/2, interpolated linearly from
/// the preceding grid point. Points must be sorted by `ρ`.
pub fn crossover(points: &[(f64, f64)]) -> Option<f64> {
    let i = points.iter().position(|&(_, f)| f < 0.5)?;
    if i == 0 {
        return Some(points[0].0);
    }
    let ((r0, f0), (r1, f1)) = (points[i - 1], points[i]);
    Some(r0 + (f0 - 0.5) / (f0 - f1) * (r1 - r0))
}

/// Success fractions over the `(δ, ρ)` grid for exactly `k = round(ρδN)`
/// sparse unit signals without noise, with and without the Onsager term.
pub fn run_phase_transition(cfg: &ExperimentConfig) -> Result<PhaseTransitionReport> {
    if cfg.experiment != ExperimentKind::PhaseTransition {
        return Err(Error::Config("run_phase_transition needs a phase_transition config".into()));
    }
    cfg.validate()?;
    let mut rhos = cfg.rhos.clone();
    rhos.sort_by(f64::total_cmp);
    let variants: Vec<(&str, bool)> = if cfg.compare_ist {
        vec![("amp", true), ("ist", false)]
    } else {
        vec![(if cfg.onsager { "amp" } else { "ist" }, cfg.onsager)]
    };
    let policies = cfg.deltas.iter().map(|&d| cfg.policy(d)).collect::<Result<Vec<_>>>()?;

    let (nd, nr, ni) = (cfg.deltas.len(), rhos.len(), cfg.instances);
    let jobs = map_range(cfg.parallelism, nd * nr * ni, |job| -> Result<Vec<PtInstanceRow>> {
        let (di, rest) = (job / (nr * ni), job % (nr * ni));
        let (ri, i) = (rest / ni, rest % ni);
        let (delta, rho) = (cfg.deltas[di], rhos[ri]);
        let k = sparsity(rho, delta, cfg.n);
        let seed = derive_seed(cfg.master_seed, &[di as u64, ri as u64, i as u64]);
        let inst = generate_k_sparse_instance(k, cfg.amplitude, delta, cfg.n, 0.0, cfg.operator, seed)?;
        let s_norm = inst.s0.iter().map(|s| s * s).sum::<f64>().sqrt();
        variants
            .iter()
            .map(|&(name, onsager)| {
                let amp = AmpConfig {
                    onsager,
                    max_iters: cfg.max_iters,
                    rel_tol: cfg.rel_tol,
                    ..AmpConfig::new(policies[di])
                };
                let (rel_err, iterations, diverged) = match run_amp(&inst, &amp) {
                    Ok(trace) => {
                        let x = &trace.final_state.x;
                        let err = x.iter().zip(&inst.s0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                        let rel = if s_norm > 0.0 { err / s_norm } else { err };
                        (rel, trace.iterations(), false)
                    }
                    Err(Error::Divergence { iteration, .. }) => (f64::INFINITY, iteration, true),
                    Err(e) => return Err(e),
                };
                Ok(PtInstanceRow {
                    delta,
                    rho,
                    algorithm: name.to_string(),
                    instance: i,
                    rel_err,
                    iterations,
                    diverged,
                })
            })
            .collect()
    });
    let mut per_instance = Vec::with_capacity(nd * nr * ni * variants.len());
    for j in jobs {
        per_instance.extend(j?);
    }

    let mut cells = Vec::new();
    let mut summary = Vec::new();
    for (di, &delta) in cfg.deltas.iter().enumerate() {
        let mut curves: Vec<Vec<(f64, f64)>> = vec![Vec::new(); variants.len()];
        for (ri, &rho) in rhos.iter().enumerate() {
            for (vi, &(name, _)) in variants.iter().enumerate() {
                let rows: Vec<&PtInstanceRow> = (0..ni)
                    .map(|i| &per_instance[((di * nr + ri) * ni + i) * variants.len() + vi])
                    .collect();
                let frac = |tol: f64| rows.iter().filter(|r| r.rel_err <= tol).count() as f64 / ni as f64;
                let successes = rows.iter().filter(|r| r.rel_err <= cfg.success_tol).count();
                let errs: Vec<f64> = rows.iter().map(|r| r.rel_err).collect();
                let row = PtCellRow {
                    delta,
                    rho,
                    k: sparsity(rho, delta, cfg.n),
                    algorithm: name.to_string(),
                    instances: ni,
                    successes,
                    success_fraction: successes as f64 / ni as f64,
                    success_fraction_tol_1e2: frac(SENSITIVITY_TOLS[0]),
                    success_fraction_tol_1e4: frac(SENSITIVITY_TOLS[1]),
                    diverged: rows.iter().filter(|r| r.diverged).count(),
                    median_rel_err: median(&errs),
                };
                curves[vi].push((rho, row.success_fraction));
                cells.push(row);
            }
        }
        let find = |name: &str| {
            variants
                .iter()
                .position(|v| v.0 == name)
                .and_then(|vi| crossover(&curves[vi]))
        };
        summary.push(PtSummaryRow {
            delta,
            rho_se: se_phase_transition(delta)?,
            amp_crossover: find("amp"),
            ist_crossover: find("ist"),
        });
    }
    Ok(PhaseTransitionReport {
        cells,
        summary,
        per_instance,
    })
}

/// `k = round(ρ δ N)` with `δN` the realized measurement count.
fn sparsity(rho: f64, delta: f64, big_n: usize) -> usize {
    let n = measurement_count(delta, big_n);
    ((rho * n as f64 + 0.5).floor() as usize).min(big_n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossover_interpolates() {
        assert!((crossover(&[(0.1, 1.0), (0.2, 0.0)]).unwrap() - 0.15).abs() < 1e-15);
        assert!((crossover(&[(0.1, 0.8), (0.2, 0.6), (0.3, 0.2)]).unwrap() - 0.225).abs() < 1e-15);
        assert_eq!(crossover(&[(0.1, 1.0), (0.2, 0.9)]), None);
        assert_eq!(crossover(&[(0.1, 0.2)]), Some(0.1));
    }

    #[test]
    fn extreme_cells() {
        let cfg = ExperimentConfig {
            n: 200,
            instances: 4,
            deltas: vec![0.3],
            rhos: vec![0.03, 0.99],
            max_iters: 300,
            ..ExperimentConfig::defaults(ExperimentKind::PhaseTransition)
        };
        let rep = run_phase_transition(&cfg).unwrap();
        let get = |rho: f64, alg: &str| {
            rep.cells
                .iter()
                .find(|c| c.rho == rho && c.algorithm == alg)
                .unwrap()
                .success_fraction
        };
        assert_eq!(get(0.03, "amp"), 1.0);
        assert_eq!(get(0.99, "amp"), 0.0);
        assert_eq!(get(0.99, "ist"), 0.0);
        assert_eq!(rep.per_instance.len(), 2 * 4 * 2);
        assert!(rep.summary[0].rho_se > 0.25 && rep.summary[0].rho_se < 0.35);
    }
}
