use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::special::ln_gamma;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub value: f64,
    pub prob: f64,
}

/// Law of the iid signal entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorDistribution {
    /// `Σ p_i δ_{x_i}`.
    PointMassMixture { atoms: Vec<Atom> },
    /// Density `exp(-|x/scale|^alpha) / Z`.
    GeneralizedGaussian { alpha: f64, scale: f64 },
}

impl PriorDistribution {
    pub fn point_mass_mixture(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let atoms = atoms
            .into_iter()
            .map(|(value, prob)| Atom { value, prob })
            .collect();
        let prior = PriorDistribution::PointMassMixture { atoms };
        prior.validate()?;
        Ok(prior)
    }

    pub fn generalized_gaussian(alpha: f64, scale: f64) -> Result<Self> {
        let prior = PriorDistribution::GeneralizedGaussian { alpha, scale };
        prior.validate()?;
        Ok(prior)
    }

    /// All mass at the origin.
    pub fn zero() -> Self {
        PriorDistribution::PointMassMixture {
            atoms: vec![Atom { value: 0.0, prob: 1.0 }],
        }
    }

    /// `(1 - eps) δ_0 + eps δ_value`.
    pub fn sparse(eps: f64, value: f64) -> Result<Self> {
        Self::point_mass_mixture([(0.0, 1.0 - eps), (value, eps)])
    }

    /// `(1 - eps) δ_0 + (eps/2)(δ_{+mu} + δ_{-mu})`.
    pub fn symmetric_three_point(eps: f64, mu: f64) -> Result<Self> {
        Self::point_mass_mixture([(0.0, 1.0 - eps), (mu, 0.5 * eps), (-mu, 0.5 * eps)])
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PriorDistribution::PointMassMixture { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::InvalidPrior("mixture needs at least one atom".into()));
                }
                for a in atoms {
                    if !a.value.is_finite() || !a.prob.is_finite() || a.prob < 0.0 {
                        return Err(Error::InvalidPrior(format!(
                            "atom ({}, {}) is not a finite value with nonnegative probability",
                            a.value, a.prob
                        )));
                    }
                }
                let total: f64 = atoms.iter().map(|a| a.prob).sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidPrior(format!(
                        "probabilities sum to {total}, not 1"
                    )));
                }
                Ok(())
            }
            PriorDistribution::GeneralizedGaussian { alpha, scale } => {
                if !(alpha.is_finite() && *alpha > 0.0 && scale.is_finite() && *scale > 0.0) {
                    return Err(Error::InvalidPrior(format!(
                        "generalized Gaussian needs alpha > 0 and scale > 0 (got {alpha}, {scale})"
                    )));
                }
                Ok(())
            }
        }
    }

    /// `∫ x² dF`.
    pub fn second_moment(&self) -> f64 {
        match self {
            PriorDistribution::PointMassMixture { atoms } => {
                atoms.iter().map(|a| a.prob * a.value * a.value).sum()
            }
            // E|X|^2 = scale² Γ(3/α) / Γ(1/α)
            PriorDistribution::GeneralizedGaussian { alpha, scale } => {
                scale * scale * (ln_gamma(3.0 / alpha) - ln_gamma(1.0 / alpha)).exp()
            }
        }
    }

    /// `P(X = 0)`.
    pub fn mass_at_zero(&self) -> f64 {
        match self {
            PriorDistribution::PointMassMixture { atoms } => atoms
                .iter()
                .filter(|a| a.value == 0.0)
                .map(|a| a.prob)
                .sum(),
            PriorDistribution::GeneralizedGaussian { .. } => 0.0,
        }
    }

    /// The law of `X` conditioned on `X != 0`, or `None` when `X = 0` a.s.
    pub fn nonzero_part(&self) -> Option<PriorDistribution> {
        match self {
            PriorDistribution::PointMassMixture { atoms } => {
                let nz: Vec<Atom> = atoms
                    .iter()
                    .filter(|a| a.value != 0.0 && a.prob > 0.0)
                    .copied()
                    .collect();
                let mass: f64 = nz.iter().map(|a| a.prob).sum();
                if mass <= 0.0 {
                    return None;
                }
                Some(PriorDistribution::PointMassMixture {
                    atoms: nz
                        .into_iter()
                        .map(|a| Atom { value: a.value, prob: a.prob / mass })
                        .collect(),
                })
            }
            PriorDistribution::GeneralizedGaussian { .. } => Some(self.clone()),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        match self {
            PriorDistribution::GeneralizedGaussian { .. } => true,
            PriorDistribution::PointMassMixture { atoms } => {
                let mass = |v: f64| -> f64 {
                    atoms.iter().filter(|a| a.value == v).map(|a| a.prob).sum()
                };
                atoms
                    .iter()
                    .all(|a| (mass(a.value) - mass(-a.value)).abs() <= 1e-15)
            }
        }
    }

    pub fn sample_one<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            PriorDistribution::PointMassMixture { atoms } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for a in atoms {
                    acc += a.prob;
                    if u < acc {
                        return a.value;
                    }
                }
                // rounding: u landed in the last 1e-12 of mass
                atoms
                    .iter()
                    .rev()
                    .find(|a| a.prob > 0.0)
                    .map_or(0.0, |a| a.value)
            }
            PriorDistribution::GeneralizedGaussian { alpha, scale } => {
                // |X/scale|^alpha ~ Gamma(1/alpha, 1)
                let gamma = Gamma::new(1.0 / alpha, 1.0).expect("alpha validated");
                let g: f64 = gamma.sample(rng);
                let magnitude = scale * g.powf(1.0 / alpha);
                if rng.random::<bool>() {
                    magnitude
                } else {
                    -magnitude
                }
            }
        }
    }

    pub fn sample_into<R: rand::Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            PriorDistribution::GeneralizedGaussian { alpha, scale } => {
                let gamma = Gamma::new(1.0 / alpha, 1.0).expect("alpha validated");
                let inv = 1.0 / alpha;
                for o in out.iter_mut() {
                    let g: f64 = gamma.sample(rng);
                    let m = scale * g.powf(inv);
                    *o = if rng.random::<bool>() { m } else { -m };
                }
            }
            PriorDistribution::PointMassMixture { .. } => {
                for o in out.iter_mut() {
                    *o = self.sample_one(rng);
                }
            }
        }
    }
}

/// `n` iid draws from `prior`, deterministic in `seed`.
pub fn sample_prior(prior: &PriorDistribution, n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Parameter("sample size must be at least 1".into()));
    }
    prior.validate()?;
    let mut rng = rng_from_seed(seed);
    let mut out = vec![0.0; n];
    prior.sample_into(&mut rng, &mut out);
    Ok(out)
}
