//! Brute-force identification check on a small discrete structural model:
//! binary `X0`, `Z` in {0, 1, 2}, binary `X1`, binary `Y`, with independent
//! finite exogenous noises.
//!
//! The interventional law `p_{Y(x0, x1)}` is computed twice: by enumerating
//! the structural equations under `do(X0 = x0, X1 = x1)`, and by the
//! adjustment sum `sum_z p(y | x0, z, x1) p(z | x0)` over conditionals read
//! off the enumerated observational joint table.

use rand::Rng;

use crate::rng::{substream, Stream};
use crate::{Error, Result};

/// Structural equations as lookup tables over exogenous noise levels.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteScm {
    /// `P(X0 = 1)`.
    pub p_x0: f64,
    pub p_uz: Vec<f64>,
    /// `Z = fz[u][x0]`.
    pub fz: Vec<[usize; 2]>,
    pub p_ux1: Vec<f64>,
    /// `X1 = fx1[u][x0][z]`.
    pub fx1: Vec<[[usize; 3]; 2]>,
    pub p_uy: Vec<f64>,
    /// `Y = fy[u][x0][z][x1]`.
    pub fy: Vec<[[[usize; 2]; 3]; 2]>,
}

/// `p[x0][x1][y]` from both routes and their largest gap.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentifiabilityReport {
    pub interventional: [[[f64; 2]; 2]; 2],
    pub adjusted: [[[f64; 2]; 2]; 2],
    pub max_discrepancy: f64,
}

fn weights(k: usize, rng: &mut impl Rng) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

impl DiscreteScm {
    /// A random model whose observational support is full: the first noise
    /// levels of `Z` and `X1` hit every value regardless of the parents.
    pub fn random(seed: u64) -> Self {
        let mut rng = substream(seed, Stream::Data);
        let (kz, kx, ky) = (6, 4, 5);
        let fz =
            (0..kz).map(|u| if u < 3 { [u, u] } else { [rng.random_range(0..3), rng.random_range(0..3)] }).collect();
        let fx1 = (0..kx)
            .map(|u| {
                let mut t = [[0usize; 3]; 2];
                for row in &mut t {
                    for v in row.iter_mut() {
                        *v = if u < 2 { u } else { rng.random_range(0..2) };
                    }
                }
                t
            })
            .collect();
        let fy = (0..ky)
            .map(|_| {
                let mut t = [[[0usize; 2]; 3]; 2];
                for a in &mut t {
                    for b in a.iter_mut() {
                        for v in b.iter_mut() {
                            *v = rng.random_range(0..2);
                        }
                    }
                }
                t
            })
            .collect();
        Self {
            p_x0: rng.random_range(0.2..0.8),
            p_uz: weights(kz, &mut rng),
            fz,
            p_ux1: weights(kx, &mut rng),
            fx1,
            p_uy: weights(ky, &mut rng),
            fy,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok_dist =
            |p: &[f64]| !p.is_empty() && p.iter().all(|&v| v >= 0.0) && (p.iter().sum::<f64>() - 1.0).abs() < 1e-9;
        if !(0.0..=1.0).contains(&self.p_x0)
            || !ok_dist(&self.p_uz)
            || !ok_dist(&self.p_ux1)
            || !ok_dist(&self.p_uy)
            || self.p_uz.len() != self.fz.len()
            || self.p_ux1.len() != self.fx1.len()
            || self.p_uy.len() != self.fy.len()
        {
            return Err(Error::Config("noise distributions and tables must agree".into()));
        }
        let in_range = self.fz.iter().flatten().all(|&z| z < 3)
            && self.fx1.iter().flatten().flatten().all(|&x| x < 2)
            && self.fy.iter().flatten().flatten().flatten().all(|&y| y < 2);
        if !in_range {
            return Err(Error::Config("table entry outside its variable's range".into()));
        }
        Ok(())
    }

    fn p_x0(&self, x0: usize) -> f64 {
        if x0 == 1 {
            self.p_x0
        } else {
            1.0 - self.p_x0
        }
    }

    /// `p[x0][z][x1][y]` by enumerating every noise combination.
    pub fn observational_joint(&self) -> [[[[f64; 2]; 2]; 3]; 2] {
        let mut joint = [[[[0.0; 2]; 2]; 3]; 2];
        for x0 in 0..2 {
            for (uz, pz) in self.p_uz.iter().enumerate() {
                let z = self.fz[uz][x0];
                for (ux, px) in self.p_ux1.iter().enumerate() {
                    let x1 = self.fx1[ux][x0][z];
                    for (uy, py) in self.p_uy.iter().enumerate() {
                        let y = self.fy[uy][x0][z][x1];
                        joint[x0][z][x1][y] += self.p_x0(x0) * pz * px * py;
                    }
                }
            }
        }
        joint
    }

    /// `p[x0][x1][y]` under `do(X0 = x0, X1 = x1)`.
    pub fn interventional(&self) -> [[[f64; 2]; 2]; 2] {
        let mut out = [[[0.0; 2]; 2]; 2];
        for (x0, slot) in out.iter_mut().enumerate() {
            for (x1, p) in slot.iter_mut().enumerate() {
                for (uz, pz) in self.p_uz.iter().enumerate() {
                    let z = self.fz[uz][x0];
                    for (uy, py) in self.p_uy.iter().enumerate() {
                        p[self.fy[uy][x0][z][x1]] += pz * py;
                    }
                }
            }
        }
        out
    }
}

/// Compares the two routes; fails if any `(x0, z, x1)` cell has zero mass.
pub fn check_identifiability(scm: &DiscreteScm) -> Result<IdentifiabilityReport> {
    scm.validate()?;
    let joint = scm.observational_joint();
    let mut adjusted = [[[0.0; 2]; 2]; 2];
    for x0 in 0..2 {
        let p_x0: f64 = joint[x0].iter().flatten().flatten().sum();
        for z in 0..3 {
            let p_z_x0: f64 = joint[x0][z].iter().flatten().sum();
            for x1 in 0..2 {
                let cell: f64 = joint[x0][z][x1].iter().sum();
                if cell <= 0.0 {
                    return Err(Error::Positivity(format!("P(X0={x0}, Z={z}, X1={x1}) = 0")));
                }
                for y in 0..2 {
                    adjusted[x0][x1][y] += joint[x0][z][x1][y] / cell * (p_z_x0 / p_x0);
                }
            }
        }
    }
    let interventional = scm.interventional();
    let max_discrepancy = interventional
        .iter()
        .flatten()
        .flatten()
        .zip(adjusted.iter().flatten().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(IdentifiabilityReport { interventional, adjusted, max_discrepancy })
}

/// Runs [`check_identifiability`] on a fixed random model.
pub fn check_identifiability_smallcase() -> Result<IdentifiabilityReport> {
    check_identifiability(&DiscreteScm::random(2024))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn routes_agree_on_random_models() {
        for seed in 0..50 {
            let r = check_identifiability(&DiscreteScm::random(seed)).unwrap();
            assert!(r.max_discrepancy <= 1e-12, "seed {seed}: {}", r.max_discrepancy);
        }
    }

    #[test]
    fn confounded_conditional_differs_from_intervention() {
        // The check is only informative if naive conditioning is biased.
        let scm = DiscreteScm::random(7);
        let joint = scm.observational_joint();
        let r = check_identifiability(&scm).unwrap();
        let mut worst: f64 = 0.0;
        for x0 in 0..2 {
            for x1 in 0..2 {
                let tot: f64 = (0..3).map(|z| joint[x0][z][x1].iter().sum::<f64>()).sum();
                let naive: f64 = (0..3).map(|z| joint[x0][z][x1][1]).sum::<f64>() / tot;
                worst = worst.max((naive - r.interventional[x0][x1][1]).abs());
            }
        }
        assert!(worst > 1e-3);
    }

    #[test]
    fn independent_model_gives_marginal() {
        let mut scm = DiscreteScm::random(3);
        for t in &mut scm.fz {
            *t = [0, 0];
        }
        scm.fz[1] = [1, 1];
        scm.fz[2] = [2, 2];
        for (u, t) in scm.fy.iter_mut().enumerate() {
            *t = [[[u % 2; 2]; 3]; 2];
        }
        let r = check_identifiability(&scm).unwrap();
        let p_y1: f64 = scm.p_uy.iter().enumerate().filter(|(u, _)| u % 2 == 1).map(|(_, p)| p).sum();
        for x0 in 0..2 {
            for x1 in 0..2 {
                assert!((r.interventional[x0][x1][1] - p_y1).abs() < 1e-12);
                assert!((r.adjusted[x0][x1][1] - p_y1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn positivity_violation_is_reported() {
        let mut scm = DiscreteScm::random(5);
        // Z never takes the value 2.
        for t in &mut scm.fz {
            for v in t.iter_mut() {
                *v = (*v).min(1);
            }
        }
        assert!(matches!(check_identifiability(&scm), Err(Error::Positivity(_))));
    }
}
