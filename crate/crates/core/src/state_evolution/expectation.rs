//! Expectations over `X ~ F`, `Z ~ N(0, 1)` of functions of `(X, X + σZ)`
//! passed through a denoiser.

use std::fmt;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::Nonlinearity;
use crate::par::{map_range, Parallelism};
use crate::rng::{derive_seed, rng_from_seed};
use crate::signal_model::PriorDistribution;
use crate::special::{generalized_gaussian_expect, norm_cdf, norm_sf, phi, GaussHermite};

/// How state expectations are evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ExpectationEngine {
    /// Exact Gaussian integrals for the soft threshold. Point-mass priors are
    /// summed exactly; generalized Gaussian priors are integrated over `X`
    /// with a fixed composite Gauss–Legendre rule.
    #[default]
    ClosedForm,
    /// Gauss–Hermite over the Gaussian part.
    GaussQuadrature { nodes: usize },
    /// Plain Monte Carlo with a reported standard error.
    MonteCarlo { samples: usize, seed: u64 },
}

impl ExpectationEngine {
    pub const DEFAULT_NODES: usize = 61;

    pub fn quadrature() -> Self {
        ExpectationEngine::GaussQuadrature {
            nodes: Self::DEFAULT_NODES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ExpectationEngine::GaussQuadrature { nodes } if nodes < 31 => Err(Error::Parameter(
                format!("quadrature needs at least 31 nodes, got {nodes}"),
            )),
            ExpectationEngine::MonteCarlo { samples, .. } if samples < 2 => {
                Err(Error::Parameter("Monte Carlo needs at least 2 samples".into()))
            }
            _ => Ok(()),
        }
    }
}

/// A value with its Monte Carlo standard error (0 for deterministic rules).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            std_error: 0.0,
        }
    }
}

/// Scalar function of the signal `u` and the noisy observation `y = u + σz`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Kernel {
    /// `(η(y) − u)²`
    SquaredError,
    /// `1{η(y) ≠ 0}`
    Nonzero,
    /// `1{η(y) = 0}`
    Zero,
    /// `η'(y)`
    Slope,
}

impl Kernel {
    #[inline]
    fn eval(self, nl: &Nonlinearity, u: f64, y: f64, theta: f64) -> f64 {
        match self {
            Kernel::SquaredError => (nl.eta(y, theta) - u).powi(2),
            Kernel::Nonzero => f64::from(u8::from(nl.eta(y, theta) != 0.0)),
            Kernel::Zero => f64::from(u8::from(nl.eta(y, theta) == 0.0)),
            Kernel::Slope => nl.eta_prime(y, theta),
        }
    }
}

/// A function `ζ(u, v, w, x)` of signal, noise, interference and estimate.
pub type CustomObservable<'a> = &'a (dyn Fn(f64, f64, f64, f64) -> f64 + Sync);

/// Exact `E[kernel]` given `X = u` for the soft threshold.
fn soft_threshold_given(kernel: Kernel, u: f64, sigma: f64, theta: f64) -> f64 {
    if sigma == 0.0 {
        return kernel.eval(&Nonlinearity::SoftThreshold, u, u, theta);
    }
    let a = (theta - u) / sigma; // Z > a  <=>  y > θ
    let b = (-theta - u) / sigma; // Z < b  <=>  y < −θ
    match kernel {
        Kernel::SquaredError => {
            let (pa, pb) = (phi(a), phi(b));
            let (upper_tail, lower_tail) = (norm_sf(a), norm_cdf(b));
            let upper = sigma * sigma * (a * pa + upper_tail) - 2.0 * sigma * theta * pa
                + theta * theta * upper_tail;
            let lower = sigma * sigma * (lower_tail - b * pb) - 2.0 * sigma * theta * pb
                + theta * theta * lower_tail;
            let middle = u * u * dead_zone_mass(a, b);
            upper + lower + middle
        }
        Kernel::Nonzero | Kernel::Slope => norm_sf(a) + norm_cdf(b),
        Kernel::Zero => dead_zone_mass(a, b),
    }
}

/// `P(b < Z < a)` without cancellation in the tails.
fn dead_zone_mass(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        norm_sf(b) - norm_sf(a)
    } else if a <= 0.0 {
        norm_cdf(a) - norm_cdf(b)
    } else {
        1.0 - norm_sf(a) - norm_cdf(b)
    }
}

/// `E_X[h(X)]` under `prior`, with `h` smooth away from `x_breaks`.
fn over_prior<H: Fn(f64) -> f64>(prior: &PriorDistribution, x_breaks: &[f64], h: H) -> f64 {
    match prior {
        PriorDistribution::PointMassMixture { atoms } => atoms
            .iter()
            .filter(|a| a.prob > 0.0)
            .map(|a| a.prob * h(a.value))
            .sum(),
        PriorDistribution::GeneralizedGaussian { alpha, scale } => {
            generalized_gaussian_expect(*alpha, *scale, x_breaks, h)
        }
    }
}

fn smooth_breaks(theta: f64, sigma: f64) -> Vec<f64> {
    let mut out = vec![theta];
    for k in [1.0, 3.0, 6.0] {
        out.push(theta + k * sigma);
        if theta > k * sigma {
            out.push(theta - k * sigma);
        }
    }
    out
}

/// `E[kernel(X, X + σZ)]`, `X ~ prior`.
pub(crate) fn expect_kernel(
    kernel: Kernel,
    prior: &PriorDistribution,
    sigma: f64,
    theta: f64,
    nl: &Nonlinearity,
    engine: &ExpectationEngine,
) -> Result<Estimate> {
    engine.validate()?;
    match *engine {
        ExpectationEngine::ClosedForm => {
            if !nl.is_soft_threshold() {
                return Err(Error::Capability(
                    "closed-form expectations are only available for the soft threshold".into(),
                ));
            }
            let breaks = smooth_breaks(theta, sigma);
            Ok(Estimate::exact(over_prior(prior, &breaks, |u| {
                soft_threshold_given(kernel, u, sigma, theta)
            })))
        }
        ExpectationEngine::GaussQuadrature { nodes } => {
            let gh = GaussHermite::new(nodes);
            let breaks: Vec<f64> = gh
                .nodes
                .iter()
                .flat_map(|&z| [theta - sigma * z, -theta - sigma * z])
                .collect();
            let value = over_prior(prior, &breaks, |u| {
                gh.expect(|z| kernel.eval(nl, u, u + sigma * z, theta))
            });
            Ok(Estimate::exact(value))
        }
        ExpectationEngine::MonteCarlo { samples, seed } => Ok(monte_carlo(samples, seed, |rng, n, acc| {
            let mut u = vec![0.0; n];
            prior.sample_into(rng, &mut u);
            for ui in u {
                let z: f64 = StandardNormal.sample(rng);
                acc.push(kernel.eval(nl, ui, ui + sigma * z, theta));
            }
        })),
    }
}

/// `E ζ(U, V, W, η(U + V + W))` with `V ~ N(0, v)`, `W ~ N(0, σ² − v)`.
pub(crate) fn expect_custom(
    zeta: CustomObservable<'_>,
    prior: &PriorDistribution,
    v: f64,
    sigma2: f64,
    theta: f64,
    nl: &Nonlinearity,
    engine: &ExpectationEngine,
) -> Result<Estimate> {
    engine.validate()?;
    let (sv, sw) = (v.sqrt(), (sigma2 - v).max(0.0).sqrt());
    match *engine {
        ExpectationEngine::ClosedForm => Err(Error::Capability(
            "custom observables need the quadrature or Monte Carlo engine".into(),
        )),
        ExpectationEngine::GaussQuadrature { nodes } => {
            let gh = GaussHermite::new(nodes);
            let value = over_prior(prior, &[theta], |u| {
                gh.expect(|z1| {
                    let vv = sv * z1;
                    gh.expect(|z2| {
                        let ww = sw * z2;
                        zeta(u, vv, ww, nl.eta(u + vv + ww, theta))
                    })
                })
            });
            Ok(Estimate::exact(value))
        }
        ExpectationEngine::MonteCarlo { samples, seed } => Ok(monte_carlo(samples, seed, |rng, n, acc| {
            let mut u = vec![0.0; n];
            prior.sample_into(rng, &mut u);
            for ui in u {
                let z1: f64 = StandardNormal.sample(rng);
                let z2: f64 = StandardNormal.sample(rng);
                let (vv, ww) = (sv * z1, sw * z2);
                acc.push(zeta(ui, vv, ww, nl.eta(ui + vv + ww, theta)));
            }
        })),
    }
}

const MC_CHUNK: usize = 1 << 16;

/// Runs `fill` over fixed-size chunks with independent derived seeds and
/// combines the chunk moments in chunk order.
fn monte_carlo<F>(samples: usize, seed: u64, fill: F) -> Estimate
where
    F: Fn(&mut crate::rng::Rng, usize, &mut Vec<f64>) + Sync + Send,
{
    let chunks = samples.div_ceil(MC_CHUNK);
    let partial = map_range(Parallelism::Parallel, chunks, |c| {
        let len = MC_CHUNK.min(samples - c * MC_CHUNK);
        let mut rng = rng_from_seed(derive_seed(seed, &[c as u64]));
        let mut acc = Vec::with_capacity(len);
        fill(&mut rng, len, &mut acc);
        // shifted sums keep the variance accurate for large means
        let shift = acc[0];
        let (s1, s2) = acc.iter().fold((0.0, 0.0), |(a, b), &f| {
            let d = f - shift;
            (a + d, b + d * d)
        });
        (len as f64, shift, s1, s2)
    });
    // pooled mean and variance from chunk summaries
    let n: f64 = partial.iter().map(|p| p.0).sum();
    let mean = partial.iter().map(|&(k, shift, s1, _)| k * shift + s1).sum::<f64>() / n;
    let ss: f64 = partial
        .iter()
        .map(|&(k, shift, s1, s2)| {
            // Σ (f − mean)² = Σ (d + shift − mean)²
            let c = shift - mean;
            s2 + 2.0 * c * s1 + k * c * c
        })
        .sum();
    let var = (ss / (n - 1.0)).max(0.0);
    Estimate {
        value: mean,
        std_error: (var / n).sqrt(),
    }
}

impl fmt::Display for Estimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.std_error > 0.0 {
            write!(f, "{} ± {}", self.value, self.std_error)
        } else {
            write!(f, "{}", self.value)
        }
    }
}
