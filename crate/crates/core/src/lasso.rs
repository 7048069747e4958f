//! Reference solver for `min ½‖y − Ax‖² + λ‖x‖₁` by cyclic coordinate
//! descent, with a KKT optimality certificate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal_model::ProblemInstance;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_SWEEPS: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LassoSolution {
    pub x_hat: Vec<f64>,
    pub lambda: f64,
    /// Coordinate sweeps performed.
    pub iterations: usize,
    pub kkt_residual: f64,
}

/// `½‖y − Ax‖² + λ‖x‖₁`.
pub fn lasso_objective(inst: &ProblemInstance, x: &[f64], lambda: f64) -> f64 {
    let ax = inst.operator.apply(x);
    let fit: f64 = inst.y.iter().zip(&ax).map(|(y, a)| (y - a).powi(2)).sum();
    0.5 * fit + lambda * x.iter().map(|v| v.abs()).sum::<f64>()
}

/// Largest violation of the optimality conditions at `x_hat`, computed from
/// a fresh residual.
pub fn verify_kkt(inst: &ProblemInstance, x_hat: &[f64], lambda: f64) -> f64 {
    let ax = inst.operator.apply(x_hat);
    let r: Vec<f64> = inst.y.iter().zip(&ax).map(|(y, a)| y - a).collect();
    let g = inst.operator.apply_adjoint(&r);
    g.iter()
        .zip(x_hat)
        .map(|(&gi, &xi)| {
            if xi != 0.0 {
                (gi - lambda * xi.signum()).abs()
            } else {
                (gi.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

fn soft(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Runs coordinate descent, calling `on_sweep` with the iterate after each
/// sweep.
pub(crate) fn coordinate_descent<F: FnMut(&[f64])>(
    inst: &ProblemInstance,
    lambda: f64,
    tol: f64,
    max_sweeps: usize,
    mut on_sweep: F,
) -> Result<LassoSolution> {
    let (n, big_n) = inst.operator.dims();
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Parameter(format!("lambda = {lambda} must be finite and >= 0")));
    }
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!("tol = {tol} must be > 0")));
    }
    if lambda == 0.0 && n < big_n {
        return Err(Error::Underdetermined { n, big_n });
    }
    let dense = inst.operator.to_dense();
    // column-major copy so each coordinate update reads a contiguous column
    let mut cols = vec![0.0; n * big_n];
    for i in 0..n {
        for (j, &a) in dense.row(i).iter().enumerate() {
            cols[j * n + i] = a;
        }
    }
    let norms2: Vec<f64> = cols.chunks_exact(n).map(|c| c.iter().map(|a| a * a).sum()).collect();

    let mut x = vec![0.0; big_n];
    let mut r = inst.y.clone();
    let mut best = (f64::INFINITY, x.clone());
    for sweep in 1..=max_sweeps {
        for j in 0..big_n {
            let col = &cols[j * n..(j + 1) * n];
            if norms2[j] == 0.0 {
                continue;
            }
            let xj = x[j];
            let g = crate::signal_model::dot(col, &r) + norms2[j] * xj;
            let new = soft(g, lambda) / norms2[j];
            let d = new - xj;
            if d != 0.0 {
                for (ri, &a) in r.iter_mut().zip(col) {
                    *ri -= a * d;
                }
                x[j] = new;
            }
        }
        on_sweep(&x);
        let kkt = verify_kkt(inst, &x, lambda);
        if kkt < best.0 {
            best = (kkt, x.clone());
        }
        if kkt <= tol {
            return Ok(LassoSolution {
                x_hat: x,
                lambda,
                iterations: sweep,
                kkt_residual: kkt,
            });
        }
        if sweep % 64 == 0 {
            // refresh the running residual against drift
            let ax = inst.operator.apply(&x);
            for ((ri, y), a) in r.iter_mut().zip(&inst.y).zip(&ax) {
                *ri = y - a;
            }
        }
    }
    Err(Error::LassoNonConvergence {
        sweeps: max_sweeps,
        kkt_residual: best.0,
        best: best.1,
    })
}

/// Solves the penalized problem to KKT residual `tol`.
pub fn solve_lasso(inst: &ProblemInstance, lambda: f64, tol: f64, max_sweeps: usize) -> Result<LassoSolution> {
    coordinate_descent(inst, lambda, tol, max_sweeps, |_| {})
}
