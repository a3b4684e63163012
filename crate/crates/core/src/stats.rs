//! Small sample statistics shared by tests, sampling-based inference and the harness.

use ndiff::Matrix;
use rand::Rng;

use crate::losses::energy_distance;
use crate::rng::permutation;
use crate::{Error, Result};

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Unbiased sample variance.
pub fn variance(v: &[f64]) -> f64 {
    let mu = mean(v);
    v.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (v.len() as f64 - 1.0)
}

pub fn sd(v: &[f64]) -> f64 {
    variance(v).sqrt()
}

pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Empirical quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7).
pub fn quantile(v: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::AlphaRange(alpha));
    }
    if v.is_empty() {
        return Err(Error::DegenerateSample { needed: 1, got: 0 });
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(sorted_quantile(&s, alpha))
}

pub fn sorted_quantile(sorted: &[f64], alpha: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * alpha;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Outcome of a two-sample permutation test on the energy distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PermutationTest {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample energy-distance permutation test.
pub fn energy_permutation_test(
    p: &Matrix,
    q: &Matrix,
    permutations: usize,
    rng: &mut impl Rng,
) -> Result<PermutationTest> {
    let statistic = energy_distance(p, q)?;
    let pooled = Matrix::vcat(&[p, q])?;
    let np = p.rows();
    let mut exceed = 0usize;
    for _ in 0..permutations {
        let idx = permutation(pooled.rows(), rng);
        let a = pooled.select_rows(&idx[..np])?;
        let b = pooled.select_rows(&idx[np..])?;
        if energy_distance(&a, &b)? >= statistic {
            exceed += 1;
        }
    }
    Ok(PermutationTest { statistic, p_value: (exceed + 1) as f64 / (permutations + 1) as f64 })
}

/// Wasserstein-1 distance between two equal-size one-dimensional samples.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    x.iter().zip(&y).map(|(p, q)| (p - q).abs()).sum::<f64>() / x.len() as f64
}
