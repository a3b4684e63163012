//! Gaussian copula links between covariate normal scores and the outcome score.
//!
//! The outcome's normal score is `s = sum_j w_j u_j + sigma * eps`, where the
//! `u_j` are independent standard-normal scores of the linked covariates.

use frengression::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum CopulaLink {
    /// Pearson correlations `rho_j = corr(u_j, s)` applied jointly; needs `sum rho_j^2 < 1`.
    Joint(Vec<(usize, f64)>),
    /// Partial correlations of `s` with each `u_j` given the earlier ones (a vine
    /// on the listed order). Positive definite for any entries in `(-1, 1)`.
    Sequential(Vec<(usize, f64)>),
}

impl CopulaLink {
    pub fn none() -> Self {
        CopulaLink::Joint(Vec::new())
    }

    pub fn coords(&self) -> Vec<usize> {
        match self {
            CopulaLink::Joint(v) | CopulaLink::Sequential(v) => v.iter().map(|p| p.0).collect(),
        }
    }

    /// Regression weights `w_j` and the residual scale `sigma`.
    pub fn weights(&self) -> Result<(Vec<f64>, f64)> {
        match self {
            CopulaLink::Joint(v) => joint_weights(&v.iter().map(|p| p.1).collect::<Vec<_>>()),
            CopulaLink::Sequential(v) => sequential_weights(&v.iter().map(|p| p.1).collect::<Vec<_>>()),
        }
    }
}

fn check_range(rho: &[f64]) -> Result<()> {
    if let Some(r) = rho.iter().find(|r| !(r.abs() < 1.0)) {
        return Err(Error::Config(format!("copula correlation {r} outside (-1, 1)")));
    }
    Ok(())
}

pub fn joint_weights(rho: &[f64]) -> Result<(Vec<f64>, f64)> {
    check_range(rho)?;
    let resid = 1.0 - rho.iter().map(|r| r * r).sum::<f64>();
    if resid <= 0.0 {
        return Err(Error::Config(format!(
            "copula correlations {rho:?} give a non positive definite correlation matrix"
        )));
    }
    Ok((rho.to_vec(), resid.sqrt()))
}

pub fn sequential_weights(partial: &[f64]) -> Result<(Vec<f64>, f64)> {
    check_range(partial)?;
    let mut resid = 1.0f64;
    let mut w = Vec::with_capacity(partial.len());
    for p in partial {
        let wj = p * resid.sqrt();
        resid -= wj * wj;
        w.push(wj);
    }
    Ok((w, resid.sqrt()))
}
