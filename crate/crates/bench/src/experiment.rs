//! End-to-end replications: simulate, fit, sample, score.

use std::path::Path;

use frengression::rng::{child_seed, substream, SimRng, Stream};
use frengression::stats::{mean, quantile};
use frengression::{fit, fit_seq, kaplan_meier, FitConfig, Matrix, SeqModel};
use frugalsim::continuous::StructuralDgp;
use frugalsim::{simulate_frugal, Dataset, Dgp, LongitudinalSpec};
use log::info;
use rayon::prelude::*;

use crate::config::{Estimand, ExperimentConfig};
use crate::error::{BenchError, Result};
use crate::metrics::{average_curves, mape, metrics, CurvePoint, Mape, Metrics, RepCurve};
use crate::output;

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutput {
    pub rep: usize,
    /// One value per target.
    pub values: Vec<f64>,
    pub curve: Option<RepCurve>,
    /// Survival curves `S(0..=T)` of model and ground truth.
    pub km: Option<(Vec<f64>, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub targets: Vec<String>,
    pub truth: Vec<f64>,
    pub replications: Vec<ReplicationOutput>,
    pub metrics: Vec<Metrics>,
    pub curve: Option<Vec<CurvePoint>>,
    pub mape: Option<Mape>,
}

impl MetricReport {
    /// Estimates of target `j` across replications.
    pub fn estimates(&self, j: usize) -> Vec<f64> {
        self.replications.iter().map(|r| r.values[j]).collect()
    }
}

/// Runs every replication and writes the result files to `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricReport> {
    let report = compute(cfg, Some(&cfg.out))?;
    output::write_report(cfg, &report)?;
    Ok(report)
}

/// Runs every replication; with `scratch`, each one also writes its own
/// `replications/rep_<k>.csv` there.
pub fn compute(cfg: &ExperimentConfig, scratch: Option<&Path>) -> Result<MetricReport> {
    cfg.validate()?;
    let dgp = cfg.catalog_entry()?.build()?;
    let (targets, truth) = truths(cfg, &dgp)?;
    if let Some(dir) = scratch {
        output::prepare_dir(dir)?;
    }
    let mut replications = (0..cfg.reps)
        .into_par_iter()
        .map(|k| {
            let out = replicate(cfg, &dgp, k, targets.len())?;
            if let Some(dir) = scratch {
                output::write_replication(dir, &targets, &out)?;
            }
            info!("replication {k} done: {:?}", out.values);
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    replications.sort_by_key(|r| r.rep);

    let metrics = (0..targets.len())
        .map(|j| metrics(&replications.iter().map(|r| r.values[j]).collect::<Vec<_>>(), truth[j]))
        .collect::<Result<Vec<_>>>()?;
    let (curve, mape) = match cfg.estimand {
        Estimand::Adrf | Estimand::Quantile { .. } => {
            let reps: Vec<RepCurve> = replications.iter().filter_map(|r| r.curve.clone()).collect();
            let curve = average_curves(&cfg.x_grid, &reps, &truth)?;
            let means: Vec<f64> = curve.iter().map(|p| p.mean).collect();
            let m = mape(&means, &truth)?;
            (Some(curve), Some(m))
        }
        _ => (None, None),
    };
    Ok(MetricReport { targets, truth, replications, metrics, curve, mape })
}

fn longitudinal(dgp: &Dgp) -> Result<&LongitudinalSpec> {
    match dgp {
        Dgp::Longitudinal(s) => Ok(s),
        _ => Err(BenchError::Unsupported("this estimand needs a longitudinal design".into())),
    }
}

fn static_only(dgp: &Dgp) -> Result<()> {
    match dgp {
        Dgp::Longitudinal(_) => Err(BenchError::Unsupported("this estimand needs a static design".into())),
        _ => Ok(()),
    }
}

fn mean_truth(dgp: &Dgp, x: f64) -> Result<f64> {
    match dgp {
        Dgp::Frugal(s) => Ok(s.margin.mean(&[x])),
        Dgp::Structural(s) => Ok(s.adrf(x)),
        Dgp::Longitudinal(_) => Err(BenchError::Unsupported("static mean of a longitudinal design".into())),
    }
}

fn quantile_truth(dgp: &Dgp, x: f64, alpha: f64) -> Result<f64> {
    match dgp {
        Dgp::Structural(s @ StructuralDgp::CubicPreAnm { .. }) if alpha == 0.5 => Ok(s.median(x)?),
        other => Ok(other.true_margin_quantile(x, alpha)?),
    }
}

/// Per-step `E Y_t(xbar)` (optionally at fixed `C`), closed form when the
/// design has one and Monte Carlo otherwise.
fn trajectory_truth(
    spec: &LongitudinalSpec,
    regime: f64,
    c: Option<f64>,
    draws: usize,
    rng: &mut SimRng,
) -> Result<Vec<f64>> {
    let xbar = vec![regime; spec.horizon];
    let closed: Option<Vec<f64>> = match (spec.setting, c) {
        (4, _) => (0..spec.horizon)
            .map(|t| spec.outcome_mean(&xbar, c.unwrap_or(0.0), t))
            .collect::<frengression::Result<Vec<f64>>>()
            .ok(),
        (1 | 3, None) => {
            (0..spec.horizon).map(|t| spec.event_probability(&xbar, t)).collect::<frengression::Result<Vec<f64>>>().ok()
        }
        _ => None,
    };
    if let Some(v) = closed {
        return Ok(v);
    }
    let b = spec.simulate_interventional(&xbar, c, draws, rng)?;
    Ok(b.y.iter().map(|y| mean(y.data())).collect())
}

fn truths(cfg: &ExperimentConfig, dgp: &Dgp) -> Result<(Vec<String>, Vec<f64>)> {
    let mut rng = substream(cfg.seed, Stream::Data);
    let grid_names = || cfg.x_grid.iter().map(|x| format!("x={x}")).collect::<Vec<_>>();
    match cfg.estimand {
        Estimand::Ate { x1, x0 } => {
            static_only(dgp)?;
            Ok((vec!["ate".into()], vec![mean_truth(dgp, x1)? - mean_truth(dgp, x0)?]))
        }
        Estimand::Adrf => {
            static_only(dgp)?;
            let t = cfg.x_grid.iter().map(|&x| mean_truth(dgp, x)).collect::<Result<Vec<_>>>()?;
            Ok((grid_names(), t))
        }
        Estimand::Quantile { alpha } => {
            static_only(dgp)?;
            let t = cfg.x_grid.iter().map(|&x| quantile_truth(dgp, x, alpha)).collect::<Result<Vec<_>>>()?;
            Ok((grid_names(), t))
        }
        Estimand::RiskDifference => {
            let spec = longitudinal(dgp)?;
            let last = spec.horizon - 1;
            let a = trajectory_truth(spec, 1.0, None, cfg.truth_draws, &mut rng)?[last];
            let b = trajectory_truth(spec, 0.0, None, cfg.truth_draws, &mut rng)?[last];
            Ok((vec!["risk_difference".into()], vec![a - b]))
        }
        Estimand::Km => {
            let spec = longitudinal(dgp)?;
            if spec.kind() != frengression::SeqKind::Surv {
                return Err(BenchError::Unsupported("Kaplan-Meier curves need a survival design".into()));
            }
            Ok((vec!["km_sup_distance".into()], vec![0.0]))
        }
        Estimand::TrajectoryMean { c } => {
            let spec = longitudinal(dgp)?;
            let t = trajectory_truth(spec, cfg.regime, c, cfg.truth_draws, &mut rng)?;
            Ok(((0..spec.horizon).map(|t| format!("t={t}")).collect(), t))
        }
    }
}

/// First event step (1-based) per unit from absorbing outcome draws.
pub fn event_times(outcomes: &[Matrix]) -> Vec<Option<usize>> {
    let n = outcomes.first().map_or(0, Matrix::rows);
    (0..n).map(|i| outcomes.iter().position(|y| y.get(i, 0) == 1.0).map(|t| t + 1)).collect()
}

fn withhold(data: &Dataset, holdout: Option<(f64, f64)>) -> Result<Matrix> {
    let Some((lo, hi)) = holdout else {
        return Ok(data.data.clone());
    };
    let keep: Vec<usize> = data.x().iter().enumerate().filter(|(_, &x)| !(x > lo && x <= hi)).map(|(i, _)| i).collect();
    Ok(data.data.select_rows(&keep).map_err(frengression::Error::from)?)
}

fn replicate(cfg: &ExperimentConfig, dgp: &Dgp, k: usize, targets: usize) -> Result<ReplicationOutput> {
    let seed = child_seed(cfg.seed, Stream::Replication(k as u64));
    let mut data_rng = substream(seed, Stream::Data);
    let mut rng = substream(seed, Stream::Sampling);
    let fit_cfg = FitConfig { seed: child_seed(seed, Stream::Init), ..cfg.fit };
    let mut out = ReplicationOutput { rep: k, values: Vec::with_capacity(targets), curve: None, km: None };
    if let Dgp::Longitudinal(spec) = dgp {
        let data = spec.simulate(cfg.n, &mut data_rng)?;
        let model = fit_seq(&data, &spec.schema(), &fit_cfg)?;
        replicate_seq(cfg, spec, &model, &mut rng, &mut out)?;
        return Ok(out);
    }
    let data = match dgp {
        Dgp::Frugal(s) => simulate_frugal(s, cfg.n, &mut data_rng)?,
        Dgp::Structural(s) => s.simulate(cfg.n, &mut data_rng)?,
        Dgp::Longitudinal(_) => unreachable!("handled above"),
    };
    let train = withhold(&data, cfg.holdout)?;
    let model = fit(&train, &data.schema, &fit_cfg)?;
    match cfg.estimand {
        Estimand::Ate { x1, x0 } => out.values.push(model.estimate_ate(&[x1], &[x0], cfg.draws, &mut rng)?.ate),
        Estimand::Adrf | Estimand::Quantile { .. } => {
            let mut curve = Vec::with_capacity(cfg.x_grid.len());
            for &x in &cfg.x_grid {
                let ys = model.sample_interventional(&[x], cfg.draws, &mut rng)?.into_vec();
                let centre = match cfg.estimand {
                    Estimand::Quantile { alpha } => quantile(&ys, alpha)?,
                    _ => mean(&ys),
                };
                curve.push((centre, quantile(&ys, 0.025)?, quantile(&ys, 0.975)?));
                out.values.push(centre);
            }
            out.curve = Some(curve);
        }
        _ => return Err(BenchError::Unsupported(format!("{} on a static design", cfg.estimand))),
    }
    Ok(out)
}

fn replicate_seq(
    cfg: &ExperimentConfig,
    spec: &LongitudinalSpec,
    model: &SeqModel,
    rng: &mut SimRng,
    out: &mut ReplicationOutput,
) -> Result<()> {
    let horizon = spec.horizon;
    let regime = |x: f64| Matrix::filled(horizon, 1, x);
    match cfg.estimand {
        Estimand::RiskDifference => {
            let a = model.sample_trajectory_interventional_marginal(&regime(1.0), cfg.draws, rng)?;
            let b = model.sample_trajectory_interventional_marginal(&regime(0.0), cfg.draws, rng)?;
            out.values.push(mean(a[horizon - 1].data()) - mean(b[horizon - 1].data()));
        }
        Estimand::Km => {
            let sim = model.sample_trajectory_interventional_marginal(&regime(cfg.regime), cfg.draws, rng)?;
            let s_sim = kaplan_meier(&event_times(&sim), horizon)?;
            let truth = spec.simulate_interventional(&vec![cfg.regime; horizon], None, cfg.draws, rng)?;
            let s_true = kaplan_meier(&truth.event_times(), horizon)?;
            out.values.push(frengression::seq::sup_distance(&s_sim, &s_true));
            out.km = Some((s_sim, s_true));
        }
        Estimand::TrajectoryMean { c } => {
            let ys = match c {
                Some(c) => model.sample_trajectory_interventional(&regime(cfg.regime), &[c], cfg.draws, rng)?,
                None => model.sample_trajectory_interventional_marginal(&regime(cfg.regime), cfg.draws, rng)?,
            };
            out.values.extend(ys.iter().map(|y| mean(y.data())));
        }
        _ => return Err(BenchError::Unsupported(format!("{} on a longitudinal design", cfg.estimand))),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn event_times_from_outcomes() {
        let y = vec![Matrix::column(&[0.0, 1.0, 0.0]), Matrix::column(&[1.0, 1.0, 0.0])];
        assert_eq!(event_times(&y), vec![Some(2), Some(1), None]);
    }
}
