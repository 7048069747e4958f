use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};

use super::operator::{build_operator, MeasurementOperator, OperatorKind};
use super::prior::PriorDistribution;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

/// `y = A s0 + w`.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub operator: MeasurementOperator,
    pub s0: Vec<f64>,
    pub w: Vec<f64>,
    pub y: Vec<f64>,
    /// Noise variance.
    pub v: f64,
    /// Realized `n / N`.
    pub delta: f64,
}

impl ProblemInstance {
    pub fn new(operator: MeasurementOperator, s0: Vec<f64>, w: Vec<f64>, v: f64) -> Result<Self> {
        let (n, big_n) = operator.dims();
        if s0.len() != big_n || w.len() != n {
            return Err(Error::Dimension(format!(
                "operator is {n}x{big_n} but s0 has {} and w has {} entries",
                s0.len(),
                w.len()
            )));
        }
        if !(v >= 0.0) {
            return Err(Error::Parameter(format!("noise variance {v} < 0")));
        }
        let mut y = operator.apply(&s0);
        for (yi, wi) in y.iter_mut().zip(&w) {
            *yi += wi;
        }
        Ok(Self {
            operator,
            s0,
            w,
            y,
            v,
            delta: n as f64 / big_n as f64,
        })
    }

    pub fn n(&self) -> usize {
        self.operator.rows()
    }

    pub fn big_n(&self) -> usize {
        self.operator.cols()
    }
}

/// `round(delta * big_n)`, halves rounded up.
pub fn measurement_count(delta: f64, big_n: usize) -> usize {
    (delta * big_n as f64 + 0.5).floor() as usize
}

/// Random instance with `s0 ~ iid prior` and `w ~ iid N(0, v)`.
pub fn generate_instance(
    prior: &PriorDistribution,
    delta: f64,
    big_n: usize,
    v: f64,
    kind: OperatorKind,
    seed: u64,
) -> Result<ProblemInstance> {
    prior.validate()?;
    let mut rng = rng_from_seed(derive_seed(seed, &[1]));
    let mut s0 = vec![0.0; big_n];
    prior.sample_into(&mut rng, &mut s0);
    instance_with_signal(s0, delta, v, kind, seed)
}

/// Instance with exactly `k` entries equal to `value` at uniformly random
/// positions and zeros elsewhere.
pub fn generate_k_sparse_instance(
    k: usize,
    value: f64,
    delta: f64,
    big_n: usize,
    v: f64,
    kind: OperatorKind,
    seed: u64,
) -> Result<ProblemInstance> {
    if k > big_n {
        return Err(Error::Parameter(format!("k = {k} exceeds N = {big_n}")));
    }
    let mut rng = rng_from_seed(derive_seed(seed, &[1]));
    let mut s0 = vec![0.0; big_n];
    for i in index::sample(&mut rng, big_n, k) {
        s0[i] = value;
    }
    instance_with_signal(s0, delta, v, kind, seed)
}

fn instance_with_signal(
    s0: Vec<f64>,
    delta: f64,
    v: f64,
    kind: OperatorKind,
    seed: u64,
) -> Result<ProblemInstance> {
    let big_n = s0.len();
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Parameter(format!("delta = {delta} not in (0, 1]")));
    }
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::Parameter(format!("noise variance {v} < 0")));
    }
    let n = measurement_count(delta, big_n);
    if n == 0 {
        return Err(Error::Dimension(format!("round(delta * N) = 0 for delta = {delta}, N = {big_n}")));
    }
    let operator = build_operator(kind, n, big_n, derive_seed(seed, &[0]))?;
    let w = if v == 0.0 {
        vec![0.0; n]
    } else {
        let mut rng = rng_from_seed(derive_seed(seed, &[2]));
        let sd = v.sqrt();
        (0..n)
            .map(|_| sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            .collect()
    };
    ProblemInstance::new(operator, s0, w, v)
}
