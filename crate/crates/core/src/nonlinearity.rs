//! Scalar denoisers `η(x; θ)` and their derivatives in `x`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal_model::{Atom, PriorDistribution};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Nonlinearity {
    /// `sign(x)·max(|x| − θ, 0)`.
    #[default]
    SoftThreshold,
    /// `E[X | X + θ Z = x]` for a point-mass mixture prior; θ plays the
    /// role of the effective noise standard deviation.
    PosteriorMean { prior: PriorDistribution },
}

pub fn soft_threshold(x: f64, theta: f64) -> f64 {
    if x > theta {
        x - theta
    } else if x < -theta {
        x + theta
    } else {
        0.0
    }
}

/// Slope of the soft threshold; 0 on the closed dead zone `|x| <= θ`.
pub fn soft_threshold_deriv(x: f64, theta: f64) -> f64 {
    if x.abs() > theta {
        1.0
    } else {
        0.0
    }
}

impl Nonlinearity {
    pub fn posterior_mean(prior: PriorDistribution) -> Result<Self> {
        prior.validate()?;
        match prior {
            PriorDistribution::PointMassMixture { .. } => Ok(Nonlinearity::PosteriorMean { prior }),
            PriorDistribution::GeneralizedGaussian { .. } => Err(Error::Capability(
                "posterior mean denoiser needs a point-mass mixture prior".into(),
            )),
        }
    }

    pub fn eval(&self, x: f64, theta: f64) -> Result<f64> {
        check_theta(theta)?;
        Ok(self.eta(x, theta))
    }

    pub fn deriv(&self, x: f64, theta: f64) -> Result<f64> {
        check_theta(theta)?;
        Ok(self.eta_prime(x, theta))
    }

    /// Unchecked `η(x; θ)`; `theta` must be nonnegative.
    #[inline]
    pub fn eta(&self, x: f64, theta: f64) -> f64 {
        match self {
            Nonlinearity::SoftThreshold => soft_threshold(x, theta),
            Nonlinearity::PosteriorMean { prior } => posterior_moments(atoms(prior), x, theta).0,
        }
    }

    /// Unchecked `η'(x; θ)`.
    #[inline]
    pub fn eta_prime(&self, x: f64, theta: f64) -> f64 {
        match self {
            Nonlinearity::SoftThreshold => soft_threshold_deriv(x, theta),
            Nonlinearity::PosteriorMean { prior } => {
                if theta == 0.0 {
                    return 0.0;
                }
                let (_, var) = posterior_moments(atoms(prior), x, theta);
                var / (theta * theta)
            }
        }
    }

    /// `η(x; θ)` and `η'(x; θ)` in one pass.
    #[inline]
    pub fn eta_and_prime(&self, x: f64, theta: f64) -> (f64, f64) {
        match self {
            Nonlinearity::SoftThreshold => (soft_threshold(x, theta), soft_threshold_deriv(x, theta)),
            Nonlinearity::PosteriorMean { prior } => {
                let (mean, var) = posterior_moments(atoms(prior), x, theta);
                let d = if theta == 0.0 { 0.0 } else { var / (theta * theta) };
                (mean, d)
            }
        }
    }

    pub fn is_soft_threshold(&self) -> bool {
        matches!(self, Nonlinearity::SoftThreshold)
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta >= 0.0 && theta.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("theta = {theta} must be finite and >= 0")))
    }
}

fn atoms(prior: &PriorDistribution) -> &[Atom] {
    match prior {
        PriorDistribution::PointMassMixture { atoms } => atoms,
        PriorDistribution::GeneralizedGaussian { .. } => {
            unreachable!("posterior mean is only constructed for mixtures")
        }
    }
}

/// Posterior mean and variance of `X` given `X + σZ = x`, via log-sum-exp.
/// At `σ = 0` the posterior collapses on the nearest atom.
fn posterior_moments(atoms: &[Atom], x: f64, sigma: f64) -> (f64, f64) {
    let live = atoms.iter().filter(|a| a.prob > 0.0);
    if sigma == 0.0 {
        let nearest = live
            .min_by(|a, b| (x - a.value).abs().total_cmp(&(x - b.value).abs()))
            .map_or(0.0, |a| a.value);
        return (nearest, 0.0);
    }
    let inv2 = 0.5 / (sigma * sigma);
    let logw = |a: &Atom| a.prob.ln() - (x - a.value).powi(2) * inv2;
    let max = live.clone().map(logw).fold(f64::NEG_INFINITY, f64::max);
    let (mut total, mut first) = (0.0, 0.0);
    for a in live.clone() {
        let w = (logw(a) - max).exp();
        total += w;
        first += w * a.value;
    }
    let mean = first / total;
    let var = live
        .map(|a| (logw(a) - max).exp() * (a.value - mean).powi(2))
        .sum::<f64>()
        / total;
    (mean, var)
}
