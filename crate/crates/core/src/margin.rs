//! Closed-form causal margins `Y(x)` with an explicit quantile function.
//!
//! A closed-form margin doubles as a generator `f(x, eta) = Q(x, Phi(eta))`,
//! so it can stand in for a fitted margin network when a user wants to
//! simulate under a chosen interventional law.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::{Error, Result};

/// Location or rate that is affine in the treatment: `a + b . x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub intercept: f64,
    pub slope: Vec<f64>,
}

impl Affine {
    pub fn new(intercept: f64, slope: Vec<f64>) -> Self {
        Self { intercept, slope }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.intercept + self.slope.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClosedFormMargin {
    /// `N(loc(x), sd^2)`.
    Gaussian { loc: Affine, sd: f64 },
    /// `Laplace(loc(x), scale)`.
    Laplace { loc: Affine, scale: f64 },
    /// `Exp(rate(x))`; the rate must stay positive on the treatments used.
    Exponential { rate: Affine },
}

fn std_normal() -> Normal {
    Normal::standard()
}

pub fn phi(z: f64) -> f64 {
    std_normal().cdf(z)
}

pub fn phi_inv(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

// Keeps Phi(eta) away from {0, 1} so heavy-tailed quantiles stay finite.
fn clamp_unit(u: f64) -> f64 {
    u.clamp(1e-15, 1.0 - 1e-15)
}

impl ClosedFormMargin {
    pub fn gaussian(intercept: f64, slope: f64, sd: f64) -> Self {
        Self::Gaussian { loc: Affine::new(intercept, vec![slope]), sd }
    }

    pub fn laplace(intercept: f64, slope: f64, scale: f64) -> Self {
        Self::Laplace { loc: Affine::new(intercept, vec![slope]), scale }
    }

    pub fn exponential(intercept: f64, slope: f64) -> Self {
        Self::Exponential { rate: Affine::new(intercept, vec![slope]) }
    }

    pub fn x_dim(&self) -> usize {
        match self {
            Self::Gaussian { loc, .. } | Self::Laplace { loc, .. } => loc.slope.len(),
            Self::Exponential { rate } => rate.slope.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Self::Gaussian { sd, .. } => *sd > 0.0,
            Self::Laplace { scale, .. } => *scale > 0.0,
            Self::Exponential { .. } => true,
        };
        if ok && self.x_dim() >= 1 {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid closed-form margin {self:?}")))
        }
    }

    /// Exact `Q_{Y(x)}(u)` for `u` in `(0, 1)`.
    pub fn quantile(&self, x: &[f64], u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::AlphaRange(u));
        }
        if x.len() != self.x_dim() {
            return Err(Error::Dimension(format!(
                "margin expects {} treatment columns, got {}",
                self.x_dim(),
                x.len()
            )));
        }
        Ok(self.quantile_unchecked(x, u))
    }

    fn quantile_unchecked(&self, x: &[f64], u: f64) -> f64 {
        match self {
            Self::Gaussian { loc, sd } => loc.eval(x) + sd * phi_inv(u),
            Self::Laplace { loc, scale } => {
                let d = u - 0.5;
                loc.eval(x) - scale * d.signum() * (1.0 - 2.0 * d.abs()).ln()
            }
            Self::Exponential { rate } => {
                let r = rate.eval(x);
                -(1.0 - u).ln() / r
            }
        }
    }

    pub fn cdf(&self, x: &[f64], y: f64) -> f64 {
        match self {
            Self::Gaussian { loc, sd } => phi((y - loc.eval(x)) / sd),
            Self::Laplace { loc, scale } => {
                let d = y - loc.eval(x);
                if d < 0.0 {
                    0.5 * (d / scale).exp()
                } else {
                    1.0 - 0.5 * (-d / scale).exp()
                }
            }
            Self::Exponential { rate } => {
                if y <= 0.0 {
                    0.0
                } else {
                    1.0 - (-rate.eval(x) * y).exp()
                }
            }
        }
    }

    pub fn mean(&self, x: &[f64]) -> f64 {
        match self {
            Self::Gaussian { loc, .. } | Self::Laplace { loc, .. } => loc.eval(x),
            Self::Exponential { rate } => 1.0 / rate.eval(x),
        }
    }

    /// Generator form `f(x, eta) = Q(x, Phi(eta))`.
    pub fn generate(&self, x: &[f64], eta: f64) -> f64 {
        self.quantile_unchecked(x, clamp_unit(phi(eta)))
    }
}
