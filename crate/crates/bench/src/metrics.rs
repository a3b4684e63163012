//! Replication summaries: bias / MAE / RMSE, MAPE and averaged quantile bands.

use log::warn;

use crate::error::{BenchError, Result};

/// Grid points with `|truth|` below this are left out of the MAPE.
pub const MAPE_ZERO_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub bias: f64,
    pub mae: f64,
    pub rmse: f64,
}

pub fn metrics(estimates: &[f64], truth: f64) -> Result<Metrics> {
    if estimates.is_empty() {
        return Err(BenchError::Empty("metrics need at least one estimate"));
    }
    let k = estimates.len() as f64;
    let err = || estimates.iter().map(|e| e - truth);
    Ok(Metrics {
        bias: err().sum::<f64>() / k,
        mae: err().map(f64::abs).sum::<f64>() / k,
        rmse: (err().map(|e| e * e).sum::<f64>() / k).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mape {
    pub value: f64,
    pub used: usize,
    pub excluded: usize,
}

pub fn mape(estimates: &[f64], truth: &[f64]) -> Result<Mape> {
    if estimates.len() != truth.len() {
        return Err(BenchError::Config(format!("curve has {} points, truth has {}", estimates.len(), truth.len())));
    }
    let (mut sum, mut used) = (0.0, 0usize);
    for (e, t) in estimates.iter().zip(truth) {
        if t.abs() < MAPE_ZERO_GUARD {
            continue;
        }
        sum += (e - t).abs() / t.abs();
        used += 1;
    }
    let excluded = truth.len() - used;
    if excluded > 0 {
        warn!("MAPE skips {excluded} grid points with zero truth");
    }
    if used == 0 {
        return Err(BenchError::Empty("MAPE needs a grid point with nonzero truth"));
    }
    Ok(Mape { value: sum / used as f64, used, excluded })
}

/// One evaluation point of an averaged curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub x: f64,
    pub mean: f64,
    pub q025: f64,
    pub q975: f64,
    pub truth: f64,
}

/// Per-replication curve: `(mean, q025, q975)` at each grid point.
pub type RepCurve = Vec<(f64, f64, f64)>;

/// Averages replication curves pointwise, bands included.
pub fn average_curves(grid: &[f64], reps: &[RepCurve], truth: &[f64]) -> Result<Vec<CurvePoint>> {
    if grid.is_empty() {
        return Err(BenchError::Empty("curve grid"));
    }
    if reps.is_empty() {
        return Err(BenchError::Empty("curve replications"));
    }
    if truth.len() != grid.len() || reps.iter().any(|r| r.len() != grid.len()) {
        return Err(BenchError::Config("curve lengths disagree with the grid".into()));
    }
    let k = reps.len() as f64;
    Ok(grid
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            let avg = |pick: fn(&(f64, f64, f64)) -> f64| reps.iter().map(|r| pick(&r[j])).sum::<f64>() / k;
            CurvePoint { x, mean: avg(|p| p.0), q025: avg(|p| p.1), q975: avg(|p| p.2), truth: truth[j] }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn metric_examples() {
        let m = metrics(&[2.0, 2.0, 2.0], 2.0).unwrap();
        assert_eq!((m.bias, m.mae, m.rmse), (0.0, 0.0, 0.0));
        let m = metrics(&[1.0, 3.0], 2.0).unwrap();
        assert!(close(m.bias, 0.0) && close(m.mae, 1.0) && close(m.rmse, 1.0));
        let m = metrics(&[2.5], 2.0).unwrap();
        assert!(close(m.bias, 0.5) && close(m.mae, 0.5) && close(m.rmse, 0.5));
        assert!(metrics(&[], 0.0).is_err());
    }

    #[test]
    fn mape_examples() {
        assert_eq!(mape(&[1.0, 2.0], &[1.0, 2.0]).unwrap().value, 0.0);
        let truth = [1.0, -2.0, 4.0];
        let scaled: Vec<f64> = truth.iter().map(|t| 1.1 * t).collect();
        assert!((mape(&scaled, &truth).unwrap().value - 0.1).abs() < 1e-12);
        assert!(close(mape(&[1.5, 2.0], &[1.0, 2.0]).unwrap().value, 0.25));
    }

    #[test]
    fn mape_zero_guard() {
        let r = mape(&[1.0, 0.3, 2.2], &[1.0, 0.0, 2.0]).unwrap();
        assert_eq!((r.used, r.excluded), (2, 1));
        assert!(close(r.value, 0.05));
        assert!(mape(&[1.0], &[0.0]).is_err());
        assert!(mape(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn bands_average_pointwise() {
        let reps = vec![vec![(1.0, 0.0, 2.0)], vec![(3.0, 1.0, 5.0)]];
        let c = average_curves(&[0.5], &reps, &[2.0]).unwrap();
        assert_eq!(c[0], CurvePoint { x: 0.5, mean: 2.0, q025: 0.5, q975: 3.5, truth: 2.0 });
        assert!(average_curves(&[], &reps, &[]).is_err());
    }
}
