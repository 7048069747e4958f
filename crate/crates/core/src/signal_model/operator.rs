use std::fmt;
use std::sync::Arc;

use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};
use rustdct::{DctPlanner, TransformType2And3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    #[default]
    DenseGaussian,
    PartialFourier,
}

/// Row-major `rows × cols` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    fn normalize_columns(&mut self) {
        let mut norms = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (n, a) in norms.iter_mut().zip(self.row(i)) {
                *n += a * a;
            }
        }
        let inv: Vec<f64> = norms.iter().map(|n| 1.0 / n.sqrt()).collect();
        for row in self.data.chunks_exact_mut(self.cols) {
            for (a, s) in row.iter_mut().zip(&inv) {
                *a *= s;
            }
        }
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o = dot(row, x);
        }
    }

    fn apply_adjoint_into(&self, z: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (&zi, row) in z.iter().zip(self.data.chunks_exact(self.cols)) {
            if zi != 0.0 {
                for (o, a) in out.iter_mut().zip(row) {
                    *o += zi * a;
                }
            }
        }
    }
}

/// Dot product with four independent accumulators; fixed reduction order.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let (ra, rb) = (chunks_a.remainder(), chunks_b.remainder());
    for (ca, cb) in chunks_a.zip(chunks_b) {
        acc[0] += ca[0] * cb[0];
        acc[1] += ca[1] * cb[1];
        acc[2] += ca[2] * cb[2];
        acc[3] += ca[3] * cb[3];
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Rows of the orthonormal DCT-II matrix, with per-column rescaling so every
/// column of the subsampled operator has unit norm.
#[derive(Clone)]
pub struct PartialDct {
    len: usize,
    row_subset: Vec<usize>,
    column_scaling: Vec<f64>,
    dct: Arc<dyn TransformType2And3<f64>>,
}

impl fmt::Debug for PartialDct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PartialDct")
            .field("len", &self.len)
            .field("row_subset", &self.row_subset)
            .finish_non_exhaustive()
    }
}

impl PartialDct {
    pub fn new(len: usize, mut row_subset: Vec<usize>) -> Result<Self> {
        row_subset.sort_unstable();
        row_subset.dedup();
        if row_subset.is_empty() || row_subset.last().is_some_and(|&r| r >= len) {
            return Err(Error::Dimension(format!(
                "row subset must be a nonempty subset of 0..{len}"
            )));
        }
        let n = len as f64;
        let mut column_scaling = vec![0.0; len];
        for (j, s) in column_scaling.iter_mut().enumerate() {
            let norm2: f64 = row_subset
                .iter()
                .map(|&k| dct_entry(k, j, n).powi(2))
                .sum();
            *s = 1.0 / norm2.sqrt();
        }
        let dct = DctPlanner::new().plan_dct2(len);
        Ok(Self {
            len,
            row_subset,
            column_scaling,
            dct,
        })
    }

    pub fn row_subset(&self) -> &[usize] {
        &self.row_subset
    }

    pub fn column_scaling(&self) -> &[f64] {
        &self.column_scaling
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let mut buf: Vec<f64> = x.iter().zip(&self.column_scaling).map(|(a, s)| a * s).collect();
        self.dct.process_dct2(&mut buf);
        let n = self.len as f64;
        let (s0, sk) = ((1.0 / n).sqrt(), (2.0 / n).sqrt());
        for (o, &k) in out.iter_mut().zip(&self.row_subset) {
            *o = buf[k] * if k == 0 { s0 } else { sk };
        }
    }

    fn apply_adjoint_into(&self, z: &[f64], out: &mut [f64]) {
        let n = self.len as f64;
        let (s0, sk) = ((1.0 / n).sqrt(), (2.0 / n).sqrt());
        out.iter_mut().for_each(|o| *o = 0.0);
        for (&zk, &k) in z.iter().zip(&self.row_subset) {
            // the unnormalized DCT-III halves the k = 0 input
            out[k] = zk * if k == 0 { 2.0 * s0 } else { sk };
        }
        self.dct.process_dct3(out);
        for (o, s) in out.iter_mut().zip(&self.column_scaling) {
            *o *= s;
        }
    }
}

/// Entry `(k, j)` of the `n × n` orthonormal DCT-II matrix.
fn dct_entry(k: usize, j: usize, n: f64) -> f64 {
    let c = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
    c * (std::f64::consts::PI * k as f64 * (2.0 * j as f64 + 1.0) / (2.0 * n)).cos()
}

/// The sensing matrix `A` (n × N) with unit-norm columns.
#[derive(Clone, Debug)]
pub enum MeasurementOperator {
    DenseGaussian(DenseMatrix),
    PartialFourier(PartialDct),
}

impl MeasurementOperator {
    /// Wraps an explicit matrix. Columns are used as given.
    pub fn from_dense(matrix: DenseMatrix) -> Self {
        MeasurementOperator::DenseGaussian(matrix)
    }

    pub fn rows(&self) -> usize {
        match self {
            MeasurementOperator::DenseGaussian(m) => m.rows,
            MeasurementOperator::PartialFourier(p) => p.row_subset.len(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            MeasurementOperator::DenseGaussian(m) => m.cols,
            MeasurementOperator::PartialFourier(p) => p.len,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows(), self.cols())
    }

    /// `A x` into `out` (length n).
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols());
        debug_assert_eq!(out.len(), self.rows());
        match self {
            MeasurementOperator::DenseGaussian(m) => m.apply_into(x, out),
            MeasurementOperator::PartialFourier(p) => p.apply_into(x, out),
        }
    }

    /// `A* z` into `out` (length N).
    pub fn apply_adjoint_into(&self, z: &[f64], out: &mut [f64]) {
        debug_assert_eq!(z.len(), self.rows());
        debug_assert_eq!(out.len(), self.cols());
        match self {
            MeasurementOperator::DenseGaussian(m) => m.apply_adjoint_into(z, out),
            MeasurementOperator::PartialFourier(p) => p.apply_adjoint_into(z, out),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows()];
        self.apply_into(x, &mut out);
        out
    }

    pub fn apply_adjoint(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols()];
        self.apply_adjoint_into(z, &mut out);
        out
    }

    /// Explicit dense copy (column `j` is `A e_j`).
    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            MeasurementOperator::DenseGaussian(m) => m.clone(),
            MeasurementOperator::PartialFourier(p) => {
                let n = p.len as f64;
                let cols = p.len;
                let mut data = Vec::with_capacity(p.row_subset.len() * cols);
                for &k in &p.row_subset {
                    data.extend((0..cols).map(|j| dct_entry(k, j, n) * p.column_scaling[j]));
                }
                DenseMatrix {
                    rows: p.row_subset.len(),
                    cols,
                    data,
                }
            }
        }
    }

    pub fn column_norms(&self) -> Vec<f64> {
        let dense = self.to_dense();
        let mut norms = vec![0.0; dense.cols];
        for i in 0..dense.rows {
            for (n, a) in norms.iter_mut().zip(dense.row(i)) {
                *n += a * a;
            }
        }
        norms.into_iter().map(f64::sqrt).collect()
    }
}

/// Random `n × big_n` operator with exactly unit-norm columns.
pub fn build_operator(kind: OperatorKind, n: usize, big_n: usize, seed: u64) -> Result<MeasurementOperator> {
    if n == 0 || n > big_n {
        return Err(Error::Dimension(format!(
            "need 1 <= n <= N, got n = {n}, N = {big_n}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    match kind {
        OperatorKind::DenseGaussian => {
            let data: Vec<f64> = (0..n * big_n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let mut m = DenseMatrix {
                rows: n,
                cols: big_n,
                data,
            };
            m.normalize_columns();
            Ok(MeasurementOperator::DenseGaussian(m))
        }
        OperatorKind::PartialFourier => {
            let rows = index::sample(&mut rng, big_n, n).into_vec();
            Ok(MeasurementOperator::PartialFourier(PartialDct::new(big_n, rows)?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_vec(rng: &mut impl Rng, len: usize) -> Vec<f64> {
        (0..len).map(|_| StandardNormal.sample(rng)).collect()
    }

    #[test]
    fn one_by_one_is_plus_minus_one() {
        for kind in [OperatorKind::DenseGaussian, OperatorKind::PartialFourier] {
            for seed in 0..5 {
                let a = build_operator(kind, 1, 1, seed).unwrap();
                let e = a.apply(&[1.0])[0];
                assert!((e.abs() - 1.0).abs() < 1e-15, "{kind:?}: {e}");
            }
        }
    }

    #[test]
    fn dense_columns_unit_norm() {
        let a = build_operator(OperatorKind::DenseGaussian, 300, 1000, 1).unwrap();
        for n in a.column_norms() {
            assert!((n - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn partial_fourier_columns_unit_norm() {
        let a = build_operator(OperatorKind::PartialFourier, 40, 128, 2).unwrap();
        for n in a.column_norms() {
            assert!((n - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn partial_fourier_matches_dense_materialization() {
        // dense oracle built entry-by-entry from the cosine formula
        let (n, big_n) = (16, 64);
        let a = build_operator(OperatorKind::PartialFourier, n, big_n, 4).unwrap();
        let MeasurementOperator::PartialFourier(p) = &a else { unreachable!() };
        let entry = |i: usize, j: usize| {
            let k = p.row_subset()[i];
            let c = if k == 0 { (1.0 / big_n as f64).sqrt() } else { (2.0 / big_n as f64).sqrt() };
            c * (std::f64::consts::PI * k as f64 * (j as f64 + 0.5) / big_n as f64).cos() * p.column_scaling()[j]
        };
        let mut rng = rng_from_seed(8);
        let x = random_vec(&mut rng, big_n);
        let z = random_vec(&mut rng, n);
        let ax = a.apply(&x);
        let atz = a.apply_adjoint(&z);
        for i in 0..n {
            let expected: f64 = (0..big_n).map(|j| entry(i, j) * x[j]).sum();
            assert!((ax[i] - expected).abs() <= 1e-8, "row {i}");
        }
        for j in 0..big_n {
            let expected: f64 = (0..n).map(|i| entry(i, j) * z[i]).sum();
            assert!((atz[j] - expected).abs() <= 1e-8, "col {j}");
        }
        // composition A*(A x)
        let ata_x = a.apply_adjoint(&ax);
        for j in 0..big_n {
            let expected: f64 = (0..n)
                .map(|i| entry(i, j) * (0..big_n).map(|l| entry(i, l) * x[l]).sum::<f64>())
                .sum();
            assert!((ata_x[j] - expected).abs() <= 1e-8);
        }
    }

    #[test]
    fn adjoint_consistency_both_kinds() {
        for (kind, n, big_n) in [
            (OperatorKind::DenseGaussian, 60, 200),
            (OperatorKind::PartialFourier, 256, 1024),
        ] {
            let a = build_operator(kind, n, big_n, 3).unwrap();
            let mut rng = rng_from_seed(99);
            for _ in 0..100 {
                let x = random_vec(&mut rng, big_n);
                let z = random_vec(&mut rng, n);
                let lhs = dot(&a.apply(&x), &z);
                let rhs = dot(&x, &a.apply_adjoint(&z));
                let scale = dot(&x, &x).sqrt() * dot(&z, &z).sqrt();
                assert!((lhs - rhs).abs() <= 1e-8 * scale, "{kind:?}");
            }
        }
    }

    #[test]
    fn dimension_errors() {
        assert!(matches!(build_operator(OperatorKind::DenseGaussian, 5, 4, 0), Err(Error::Dimension(_))));
        assert!(build_operator(OperatorKind::PartialFourier, 0, 4, 0).is_err());
    }

    #[test]
    fn deterministic_in_seed() {
        let a = build_operator(OperatorKind::DenseGaussian, 10, 30, 5).unwrap().to_dense();
        let b = build_operator(OperatorKind::DenseGaussian, 10, 30, 5).unwrap().to_dense();
        assert_eq!(a, b);
    }
}
