//! Oracles shared by the integration tests. They work on plain dense
//! arrays and do not call the library's algorithms.

#![allow(dead_code)]

use amp_core::signal_model::ProblemInstance;

/// `½‖y − Ax‖² + λ‖x‖₁` minimized by accelerated proximal gradient on the
/// dense matrix, independent of the library solver.
pub fn proximal_gradient_oracle(a: &[Vec<f64>], y: &[f64], lambda: f64) -> Vec<f64> {
    let (n, big_n) = (a.len(), a[0].len());
    // power iteration for ‖A‖²
    let mut v = vec![1.0; big_n];
    let mut lip = 0.0;
    for _ in 0..500 {
        let av: Vec<f64> = a.iter().map(|r| r.iter().zip(&v).map(|(p, q)| p * q).sum()).collect();
        let mut atav = vec![0.0; big_n];
        for i in 0..n {
            for j in 0..big_n {
                atav[j] += a[i][j] * av[i];
            }
        }
        lip = atav.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = atav.iter().map(|x| x / lip).collect();
    }
    let step = 1.0 / (1.01 * lip);
    let (mut x, mut w) = (vec![0.0; big_n], vec![0.0; big_n]);
    let mut tk = 1.0f64;
    for _ in 0..100_000 {
        let r: Vec<f64> = (0..n)
            .map(|i| y[i] - a[i].iter().zip(&w).map(|(p, q)| p * q).sum::<f64>())
            .collect();
        let mut next = vec![0.0; big_n];
        for j in 0..big_n {
            let g: f64 = (0..n).map(|i| a[i][j] * r[i]).sum();
            let u = w[j] + step * g;
            next[j] = u.signum() * (u.abs() - step * lambda).max(0.0);
        }
        let tn = 0.5 * (1.0 + (1.0 + 4.0 * tk * tk).sqrt());
        for j in 0..big_n {
            w[j] = next[j] + (tk - 1.0) / tn * (next[j] - x[j]);
        }
        x = next;
        tk = tn;
    }
    x
}

pub fn dense_rows(inst: &ProblemInstance) -> Vec<Vec<f64>> {
    let d = inst.operator.to_dense();
    (0..d.rows()).map(|i| d.row(i).to_vec()).collect()
}

/// One step written out with explicit loops over the dense matrix.
pub fn transcribed_step(a: &[Vec<f64>], y: &[f64], x: &[f64], z: &[f64], theta: f64) -> (Vec<f64>, Vec<f64>) {
    let (n, big_n) = (a.len(), a[0].len());
    let delta = n as f64 / big_n as f64;
    let mut x_new = vec![0.0; big_n];
    let mut active = 0usize;
    for j in 0..big_n {
        let mut u = x[j];
        for i in 0..n {
            u += a[i][j] * z[i];
        }
        if u > theta {
            x_new[j] = u - theta;
            active += 1;
        } else if u < -theta {
            x_new[j] = u + theta;
            active += 1;
        }
    }
    let onsager = active as f64 / big_n as f64 / delta;
    let mut z_new = vec![0.0; n];
    for i in 0..n {
        let mut ax = 0.0;
        for j in 0..big_n {
            ax += a[i][j] * x_new[j];
        }
        z_new[i] = y[i] - ax + onsager * z[i];
    }
    (x_new, z_new)
}
