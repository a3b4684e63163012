//! Static frugal specifications: a past sampler, a closed-form causal margin
//! and a Gaussian copula tying designated covariates to the outcome.

use frengression::margin::{phi, phi_inv};
use frengression::{ClosedFormMargin, Column, ColumnSchema, Error, Matrix, Result};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::copula::CopulaLink;

pub const WEAK_OVERLAP_BLOCK: usize = 5;

/// `2 * expit(1) - 1`.
pub fn weak_overlap_rho() -> f64 {
    2.0 * expit(1.0) - 1.0
}

pub fn expit(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Law of `(Z, X)`. Every covariate it draws is marginally `N(0, 1)`, so its
/// normal score is the covariate itself.
#[derive(Debug, Clone, PartialEq)]
pub enum PastSampler {
    /// `Z = (I, C)` with five columns each; `X ~ Bern(expit(beta_i * sum I + sum C))`.
    WeakOverlap { beta_i: f64 },
    /// `d_z` independent covariates and a randomised binary treatment.
    Rct { d_z: usize, p_treat: f64 },
}

impl PastSampler {
    pub fn d_z(&self) -> usize {
        match self {
            PastSampler::WeakOverlap { .. } => 2 * WEAK_OVERLAP_BLOCK,
            PastSampler::Rct { d_z, .. } => *d_z,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PastSampler::WeakOverlap { beta_i } if !beta_i.is_finite() => {
                Err(Error::Config(format!("beta_i must be finite, got {beta_i}")))
            }
            PastSampler::Rct { d_z, p_treat } if *d_z == 0 || !(0.0..=1.0).contains(p_treat) => {
                Err(Error::Config(format!("rct needs d_z > 0 and p in [0, 1], got {d_z} and {p_treat}")))
            }
            _ => Ok(()),
        }
    }

    pub fn schema(&self) -> ColumnSchema {
        let z = match self {
            PastSampler::WeakOverlap { .. } => (1..=WEAK_OVERLAP_BLOCK)
                .map(|j| Column::continuous(format!("I{j}")))
                .chain((1..=WEAK_OVERLAP_BLOCK).map(|j| Column::continuous(format!("C{j}"))))
                .collect(),
            PastSampler::Rct { d_z, .. } => (1..=*d_z).map(|j| Column::continuous(format!("Z{j}"))).collect(),
        };
        ColumnSchema::new(z, vec![Column::binary("X")], vec![Column::continuous("Y")])
            .expect("static past schema is well formed")
    }

    /// Treatment probability given one covariate row.
    pub fn propensity(&self, z: &[f64]) -> f64 {
        match self {
            PastSampler::WeakOverlap { beta_i } => {
                let (i, c) = z.split_at(WEAK_OVERLAP_BLOCK);
                expit(beta_i * i.iter().sum::<f64>() + c.iter().sum::<f64>())
            }
            PastSampler::Rct { p_treat, .. } => *p_treat,
        }
    }

    /// Draws `n` rows of `(Z, X)`.
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> (Matrix, Vec<f64>) {
        let dz = self.d_z();
        let z = Matrix::from_fn(n, dz, |_, _| rng.sample(StandardNormal));
        let x = (0..n)
            .map(|i| {
                let p = self.propensity(z.row(i));
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        (z, x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrugalSpec {
    pub past: PastSampler,
    pub margin: ClosedFormMargin,
    pub copula: CopulaLink,
    pub horizon: usize,
}

/// A simulated table in the `Z | X | Y` column layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: ColumnSchema,
    pub data: Matrix,
}

impl Dataset {
    pub fn z(&self) -> Matrix {
        self.data.slice_cols(0, self.schema.d_z()).expect("schema matches data")
    }

    pub fn x(&self) -> Vec<f64> {
        self.data.col(self.schema.d_z())
    }

    pub fn y(&self) -> Vec<f64> {
        self.data.col(self.schema.d_z() + self.schema.d_x())
    }
}

impl FrugalSpec {
    pub fn new(past: PastSampler, margin: ClosedFormMargin, copula: CopulaLink) -> Result<Self> {
        let s = Self { past, margin, copula, horizon: 1 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.past.validate()?;
        self.margin.validate()?;
        if self.margin.x_dim() != 1 {
            return Err(Error::Config("static margins take one treatment".into()));
        }
        if let Some(&j) = self.copula.coords().iter().find(|&&j| j >= self.past.d_z()) {
            return Err(Error::Config(format!("copula coordinate {j} outside the {} covariates", self.past.d_z())));
        }
        self.copula.weights()?;
        Ok(())
    }

    pub fn schema(&self) -> ColumnSchema {
        self.past.schema()
    }

    /// `E Y(1) - E Y(0)`.
    pub fn true_ate(&self) -> f64 {
        self.margin.mean(&[1.0]) - self.margin.mean(&[0.0])
    }

    pub fn with_margin(&self, margin: ClosedFormMargin) -> Result<Self> {
        Self::new(self.past.clone(), margin, self.copula.clone())
    }
}

pub fn true_margin_quantile(spec: &FrugalSpec, x: f64, alpha: f64) -> Result<f64> {
    spec.margin.quantile(&[x], alpha)
}

/// Draws `(Z, X)` first and only then the outcome noise, so two specs that
/// differ only in their margin share the `(Z, X)` block under one seed.
pub fn simulate_frugal(spec: &FrugalSpec, n: usize, rng: &mut impl Rng) -> Result<Dataset> {
    spec.validate()?;
    let (z, x) = spec.past.sample(n, rng);
    attach_outcomes(spec, z, &x, rng)
}

/// Draws `(Z, Y(x))` with the treatment forced to `x`; `Y(x)` follows the margin exactly.
pub fn simulate_frugal_interventional(spec: &FrugalSpec, x: f64, n: usize, rng: &mut impl Rng) -> Result<Dataset> {
    spec.validate()?;
    let (z, _) = spec.past.sample(n, rng);
    attach_outcomes(spec, z, &vec![x; n], rng)
}

// Outcome score: regression on the linked covariates plus independent noise.
fn attach_outcomes(spec: &FrugalSpec, z: Matrix, x: &[f64], rng: &mut impl Rng) -> Result<Dataset> {
    let (w, sigma) = spec.copula.weights()?;
    let coords = spec.copula.coords();
    let (n, dz) = z.shape();
    let mut data = Matrix::zeros(n, dz + 2);
    for i in 0..n {
        let zi = z.row(i);
        let eps: f64 = rng.sample(StandardNormal);
        let score = coords.iter().zip(&w).map(|(&j, wj)| wj * zi[j]).sum::<f64>() + sigma * eps;
        let row = data.row_mut(i);
        row[..dz].copy_from_slice(zi);
        row[dz] = x[i];
        row[dz + 1] = spec.margin.quantile(&[x[i]], phi(score).clamp(1e-15, 1.0 - 1e-15))?;
    }
    Ok(Dataset { schema: spec.schema(), data })
}

/// Outcome normal score of an observed `y` under treatment `x`.
pub fn outcome_score(spec: &FrugalSpec, x: f64, y: f64) -> f64 {
    phi_inv(spec.margin.cdf(&[x], y).clamp(1e-15, 1.0 - 1e-15))
}

pub fn make_weak_overlap(beta_i: f64) -> Result<FrugalSpec> {
    let rho = weak_overlap_rho();
    let link = (WEAK_OVERLAP_BLOCK..2 * WEAK_OVERLAP_BLOCK).map(|j| (j, rho)).collect();
    FrugalSpec::new(
        PastSampler::WeakOverlap { beta_i },
        ClosedFormMargin::gaussian(0.0, 2.0, 1.0),
        CopulaLink::Sequential(link),
    )
}

/// Six covariates, `X ~ Bern(0.5)`, `Y(x) ~ N(2x, 1)`, copula on `Z5` and `Z6`.
pub fn make_rct() -> Result<FrugalSpec> {
    let rho = weak_overlap_rho();
    FrugalSpec::new(
        PastSampler::Rct { d_z: 6, p_treat: 0.5 },
        ClosedFormMargin::gaussian(0.0, 2.0, 1.0),
        CopulaLink::Joint(vec![(4, rho), (5, rho)]),
    )
}
