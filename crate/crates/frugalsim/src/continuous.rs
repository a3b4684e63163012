//! Structural continuous-treatment samplers whose causal margins are only
//! known through their mean curve (or, for the cubic pre-ANM, its median).

use frengression::margin::phi;
use frengression::{Column, ColumnSchema, Error, Matrix, Result};
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::frugal::Dataset;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StructuralDgp {
    /// `Z_j ~ Exp(1)`, `X ~ Exp(rate Z0 + Z1)`,
    /// `Y ~ N(x + (Z0 + Z2) exp(-x (Z0 + Z2)), 1)`.
    HiranoImbens { p: usize },
    /// `Z_j ~ N(0, 1)`, `X ~ N(-2 sin(2 Z1) + Z2^2 + Z3 + cos Z4 - 5/6, 1)`,
    /// `Y ~ N(x + Z1 + cos Z2 + Z5^2 + Z6 - 1/2, 1)` with one-based `Z_k`.
    Sun { p: usize },
    /// `Y = (X + eta)^3` with `X, eta ~ Unif[-1, 1]`, both tied to `Z ~ N(0, 1)`
    /// through Gaussian copulas with correlation `rho`.
    CubicPreAnm { rho: f64 },
}

pub fn make_continuous(name: &str, p: usize) -> Result<StructuralDgp> {
    match name.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
        "hiranoimbens" => Ok(StructuralDgp::HiranoImbens { p }),
        "sun" => Ok(StructuralDgp::Sun { p }),
        _ => Err(Error::Config(format!("unknown continuous dgp `{name}`"))),
    }
}

fn min_width(dgp: &StructuralDgp) -> usize {
    match dgp {
        StructuralDgp::HiranoImbens { .. } => 3,
        StructuralDgp::Sun { .. } => 6,
        StructuralDgp::CubicPreAnm { .. } => 1,
    }
}

impl StructuralDgp {
    pub fn d_z(&self) -> usize {
        match self {
            StructuralDgp::HiranoImbens { p } | StructuralDgp::Sun { p } => *p,
            StructuralDgp::CubicPreAnm { .. } => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_z() < min_width(self) {
            return Err(Error::Config(format!("{self:?} needs at least {} covariates", min_width(self))));
        }
        if let StructuralDgp::CubicPreAnm { rho } = self {
            if !(rho.abs() < 1.0) {
                return Err(Error::Config(format!("copula correlation {rho} outside (-1, 1)")));
            }
        }
        Ok(())
    }

    pub fn schema(&self) -> ColumnSchema {
        let z = (1..=self.d_z()).map(|j| Column::continuous(format!("Z{j}"))).collect();
        ColumnSchema::new(z, vec![Column::continuous("X")], vec![Column::continuous("Y")])
            .expect("structural schema is well formed")
    }

    /// Closed-form `E Y(x)`.
    pub fn adrf(&self, x: f64) -> f64 {
        match self {
            StructuralDgp::HiranoImbens { .. } => x + 2.0 / (1.0 + x).powi(3),
            StructuralDgp::Sun { .. } => x + 0.5 + (-0.5f64).exp(),
            // E (x + eta)^3 with eta ~ Unif[-1, 1].
            StructuralDgp::CubicPreAnm { .. } => x.powi(3) + x,
        }
    }

    /// Closed-form median of `Y(x)` where one is known.
    pub fn median(&self, x: f64) -> Result<f64> {
        match self {
            StructuralDgp::CubicPreAnm { .. } => Ok(x.powi(3)),
            _ => Err(Error::Unsupported(format!("{self:?} has no closed-form median"))),
        }
    }

    fn draw_z(&self, rng: &mut impl Rng) -> Vec<f64> {
        let d = self.d_z();
        match self {
            StructuralDgp::HiranoImbens { .. } => {
                let e = Exp::new(1.0).expect("unit rate");
                (0..d).map(|_| e.sample(rng)).collect()
            }
            _ => (0..d).map(|_| rng.sample(StandardNormal)).collect(),
        }
    }

    fn draw_x(&self, z: &[f64], rng: &mut impl Rng) -> f64 {
        match self {
            StructuralDgp::HiranoImbens { .. } => Exp::new(z[0] + z[1]).expect("positive rate").sample(rng),
            StructuralDgp::Sun { .. } => {
                let m = -2.0 * (2.0 * z[0]).sin() + z[1] * z[1] + z[2] + z[3].cos() - 5.0 / 6.0;
                m + rng.sample::<f64, _>(StandardNormal)
            }
            StructuralDgp::CubicPreAnm { rho } => uniform_tied(z[0], *rho, rng),
        }
    }

    /// One draw of `Y(x)` for the covariate row `z`.
    pub fn outcome(&self, x: f64, z: &[f64], rng: &mut impl Rng) -> f64 {
        match self {
            StructuralDgp::HiranoImbens { .. } => {
                let s = z[0] + z[2];
                x + s * (-x * s).exp() + rng.sample::<f64, _>(StandardNormal)
            }
            StructuralDgp::Sun { .. } => {
                x + z[0] + z[1].cos() + z[4] * z[4] + z[5] - 0.5 + rng.sample::<f64, _>(StandardNormal)
            }
            StructuralDgp::CubicPreAnm { rho } => (x + uniform_tied(z[0], *rho, rng)).powi(3),
        }
    }

    pub fn simulate(&self, n: usize, rng: &mut impl Rng) -> Result<Dataset> {
        self.validate()?;
        let d = self.d_z();
        let mut data = Matrix::zeros(n, d + 2);
        for i in 0..n {
            let z = self.draw_z(rng);
            let x = self.draw_x(&z, rng);
            let y = self.outcome(x, &z, rng);
            let row = data.row_mut(i);
            row[..d].copy_from_slice(&z);
            row[d] = x;
            row[d + 1] = y;
        }
        Ok(Dataset { schema: self.schema(), data })
    }

    /// Monte Carlo `E Y(x)` over fresh covariates.
    pub fn monte_carlo_adrf(&self, x: f64, draws: usize, rng: &mut impl Rng) -> f64 {
        let total: f64 = (0..draws)
            .map(|_| {
                let z = self.draw_z(rng);
                self.outcome(x, &z, rng)
            })
            .sum();
        total / draws as f64
    }
}

/// `2 Phi(rho z + sqrt(1 - rho^2) e) - 1`: uniform on `[-1, 1]` for standard normal `z`.
fn uniform_tied(z: f64, rho: f64, rng: &mut impl Rng) -> f64 {
    let e: f64 = rng.sample(StandardNormal);
    2.0 * phi(rho * z + (1.0 - rho * rho).sqrt() * e) - 1.0
}
