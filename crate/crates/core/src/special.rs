//! Gaussian helpers and fixed quadrature rules.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::sync::OnceLock;

/// Standard normal density.
pub fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `1 - Φ(x)`, accurate for large positive `x`.
pub fn norm_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Gauss–Hermite rule for the standard normal weight: `Σ w_i f(x_i) ≈ E f(Z)`.
#[derive(Clone, Debug)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "need at least one node");
        // Newton iteration on orthonormal Hermite polynomials (physicists'
        // weight), then rescaled to the probabilists' weight.
        let pim4 = PI.powf(-0.25);
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let nf = n as f64;
        let m = n.div_ceil(2);
        let mut z = 0.0f64;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..200 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        let norm = PI.sqrt();
        let nodes = x.iter().rev().map(|t| t * SQRT_2).collect();
        let weights = w.iter().rev().map(|wi| wi / norm).collect();
        Self { nodes, weights }
    }

    pub fn expect<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * f(z))
            .sum()
    }
}

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = 1.0;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
                }
                pp = nf * (z * p1 - p2) / (z * z - 1.0);
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 {
                    break;
                }
            }
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        Self { nodes, weights }
    }

    /// Integral of `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        half * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(mid + half * t))
            .sum::<f64>()
    }
}

fn legendre20() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(20))
}

/// `E g(X)` for `X` with density `exp(-|x/scale|^alpha) / Z`.
///
/// Uses the substitution `u = |x/scale|^alpha`, which turns the integral
/// into `∫ e^{-u} u^{1/α - 1} g(±scale·u^{1/α}) du / Γ(1/α)` on the half
/// line, integrated with composite Gauss–Legendre on a fixed panel layout.
/// `x_breaks` are abscissae (in x) where `g` changes character; panels are
/// refined around their images. The layout depends continuously on the
/// breakpoints, so the result is a continuous function of parameters.
pub fn generalized_gaussian_expect<G>(alpha: f64, scale: f64, x_breaks: &[f64], g: G) -> f64
where
    G: Fn(f64) -> f64,
{
    let inv_a = 1.0 / alpha;
    let log_norm = ln_gamma(inv_a);
    let u_max = (150.0f64).max(10.0 * inv_a + 100.0);

    let mut breaks: Vec<f64> = vec![0.0];
    breaks.extend((0..=10).rev().map(|k| 10f64.powi(-k - 1)));
    let mut u = 0.25;
    while u < u_max {
        breaks.push(u);
        u = if u < 2.0 { u + 0.25 } else { u * 1.2 };
    }
    breaks.push(u_max);
    for &xb in x_breaks {
        let xb = xb.abs();
        if xb > 0.0 && xb.is_finite() {
            let ub = (xb / scale).powf(alpha);
            if ub < u_max {
                for f in [0.9, 0.97, 1.0, 1.03, 1.1] {
                    let v = ub * f;
                    if v > 0.0 && v < u_max {
                        breaks.push(v);
                    }
                }
            }
        }
    }
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * b.abs().max(1e-300));

    let rule = legendre20();
    let integrand = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let x = scale * u.powf(inv_a);
        let weight = (-u + (inv_a - 1.0) * u.ln() - log_norm).exp();
        weight * 0.5 * (g(x) + g(-x))
    };
    // the first panel in x, where the density is bounded and smooth
    let x1 = scale * breaks[1].powf(inv_a);
    let dens0 = alpha / (scale * log_norm.exp());
    let head = rule.integrate(0.0, x1, |x| {
        dens0 * (-(x / scale).powf(alpha)).exp() * 0.5 * (g(x) + g(-x))
    });
    head + breaks[1..]
        .windows(2)
        .map(|w| rule.integrate(w[0], w[1], integrand))
        .sum::<f64>()
}

/// Median by the midpoint rule for even counts. Returns NaN when empty.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
