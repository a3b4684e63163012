//! Sequential and survival models on small hand-written longitudinal data.

use std::sync::OnceLock;

use frengression::rng::{substream, SimRng, Stream};
use frengression::stats;
use frengression::{
    fit, fit_seq, ColumnKind, ColumnSchema, FitConfig, Matrix, SeqKind, SeqModel, SeqSchema, TrajectoryBatch,
};
use rand::Rng;

fn expit(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn normal(rng: &mut SimRng) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

fn schema(y_binary: bool) -> SeqSchema {
    SeqSchema { c_binary: vec![false], z_binary: vec![false], x_binary: vec![true], y_binary: vec![y_binary] }
}

/// `C ~ N(0,1)`, `Z_t ~ N(X_{t-1}, 1)`, `X_t ~ Bern(expit(Z_t + C))`,
/// `Y_t = 2 X_t + X_{t-1} + C + 0.5 Z_t + N(0, 0.75)` with `X_{-1} = 0`.
/// Under `do(xbar = 1)` at `C = 0` the mean of `Y_t` is `2` at `t = 0` and
/// `3.5` afterwards.
fn longitudinal(n: usize, horizon: usize, rng: &mut SimRng) -> TrajectoryBatch {
    let mut c = Vec::with_capacity(n);
    let mut z = vec![Vec::with_capacity(n); horizon];
    let mut x = vec![Vec::with_capacity(n); horizon];
    let mut y = vec![Vec::with_capacity(n); horizon];
    for _ in 0..n {
        let ci = normal(rng);
        c.push(ci);
        let mut prev = 0.0;
        for t in 0..horizon {
            let zt = prev + normal(rng);
            let xt = if rng.random_bool(expit(zt + ci)) { 1.0 } else { 0.0 };
            let yt = 2.0 * xt + prev + ci + 0.5 * zt + 0.75f64.sqrt() * normal(rng);
            z[t].push(zt);
            x[t].push(xt);
            y[t].push(yt);
            prev = xt;
        }
    }
    let col = |v: Vec<f64>| Matrix::column(&v);
    TrajectoryBatch::new(
        col(c),
        z.into_iter().map(col).collect(),
        x.into_iter().map(col).collect(),
        y.into_iter().map(col).collect(),
        SeqKind::Seq,
    )
    .unwrap()
}

/// Discrete-time hazard `expit(-2 + X_t + C)`; `Y_t` is the cumulative event indicator.
fn survival(n: usize, horizon: usize, rng: &mut SimRng) -> TrajectoryBatch {
    let mut c = Vec::with_capacity(n);
    let mut z = vec![Vec::with_capacity(n); horizon];
    let mut x = vec![Vec::with_capacity(n); horizon];
    let mut y = vec![Vec::with_capacity(n); horizon];
    for _ in 0..n {
        let ci = normal(rng);
        c.push(ci);
        let mut dead = false;
        for t in 0..horizon {
            let (zt, xt) = if dead {
                (0.0, 0.0)
            } else {
                let zt = normal(rng);
                (zt, if rng.random_bool(expit(zt)) { 1.0 } else { 0.0 })
            };
            if !dead && rng.random_bool(expit(-2.0 + xt + ci)) {
                dead = true;
            }
            z[t].push(zt);
            x[t].push(xt);
            y[t].push(if dead { 1.0 } else { 0.0 });
        }
    }
    let col = |v: Vec<f64>| Matrix::column(&v);
    TrajectoryBatch::new(
        col(c),
        z.into_iter().map(col).collect(),
        x.into_iter().map(col).collect(),
        y.into_iter().map(col).collect(),
        SeqKind::Surv,
    )
    .unwrap()
}

fn config(seed: u64, epochs: usize) -> FitConfig {
    FitConfig { epochs, hidden_width: 32, seed, ..FitConfig::default() }
}

fn seq_model() -> &'static SeqModel {
    static CELL: OnceLock<SeqModel> = OnceLock::new();
    CELL.get_or_init(|| {
        let data = longitudinal(4000, 3, &mut substream(20, Stream::Data));
        fit_seq(&data, &schema(false), &config(20, 600)).unwrap()
    })
}

#[test]
fn interventional_means_follow_the_treatment_history() {
    let model = seq_model();
    let ones = Matrix::filled(3, 1, 1.0);
    let traj =
        model.sample_trajectory_interventional(&ones, &[0.0], 50_000, &mut substream(21, Stream::Sampling)).unwrap();
    for (t, want) in [2.0, 3.5, 3.5].into_iter().enumerate() {
        let m = stats::mean(traj[t].data());
        assert!((m - want).abs() <= 0.2, "t = {t}: {m} vs {want}");
    }
}

#[test]
fn trajectories_are_reproducible_and_shaped() {
    let model = seq_model();
    let ones = Matrix::filled(3, 1, 1.0);
    let a = model.sample_trajectory_interventional(&ones, &[0.0], 20, &mut substream(22, Stream::Sampling)).unwrap();
    let b = model.sample_trajectory_interventional(&ones, &[0.0], 20, &mut substream(22, Stream::Sampling)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 3);
    assert!(model
        .sample_trajectory_interventional(&Matrix::filled(2, 1, 1.0), &[0.0], 5, &mut substream(22, Stream::Sampling))
        .is_err());
    let joint = model.sample_trajectory_joint(100, &mut substream(23, Stream::Sampling)).unwrap();
    assert_eq!((joint.len(), joint.horizon()), (100, 3));
    assert!(joint.x.iter().all(|m| m.data().iter().all(|&v| v == 0.0 || v == 1.0)));
}

#[test]
fn baseline_draws_match_training_moments() {
    let data = longitudinal(4000, 3, &mut substream(20, Stream::Data));
    let c = seq_model().sample_baseline(10_000, &mut substream(24, Stream::Sampling)).unwrap();
    assert!((stats::mean(c.data()) - stats::mean(data.c.data())).abs() <= 0.1);
    assert!((stats::sd(c.data()) - stats::sd(data.c.data())).abs() <= 0.1);
    assert_eq!(seq_model().sample_baseline(0, &mut substream(24, Stream::Sampling)).unwrap().rows(), 0);
}

#[test]
fn survival_draws_are_absorbing() {
    let data = survival(2000, 4, &mut substream(30, Stream::Data));
    let model = fit_seq(&data, &schema(true), &config(30, 150)).unwrap();
    let sim = model.sample_trajectory_joint(2000, &mut substream(31, Stream::Sampling)).unwrap();
    for i in 0..sim.len() {
        let path: Vec<f64> = sim.y.iter().map(|m| m.get(i, 0)).collect();
        assert!(path.iter().all(|&v| v == 0.0 || v == 1.0));
        assert!(path.windows(2).all(|w| w[1] >= w[0]), "unit {i}: {path:?}");
        for t in 0..sim.horizon() {
            assert_eq!(sim.at_risk[t][i], t == 0 || path[t - 1] == 0.0);
        }
    }
    let ones = Matrix::filled(4, 1, 1.0);
    let traj =
        model.sample_trajectory_interventional(&ones, &[0.0], 500, &mut substream(32, Stream::Sampling)).unwrap();
    for i in 0..500 {
        assert!((1..4).all(|t| traj[t].get(i, 0) >= traj[t - 1].get(i, 0)));
    }
}

#[test]
fn single_step_matches_static_fit_in_law() {
    // With T = 1 the sequential model is a static model with C as an extra covariate.
    let data = longitudinal(3000, 1, &mut substream(40, Stream::Data));
    let cfg = FitConfig { fit_past: false, ..config(40, 400) };
    let seq = fit_seq(&data, &schema(false), &cfg).unwrap();
    let schema = ColumnSchema::simple(
        &[ColumnKind::Continuous, ColumnKind::Continuous],
        &[ColumnKind::Binary],
        &[ColumnKind::Continuous],
    )
    .unwrap();
    let table = Matrix::hcat(&[&data.c, &data.z[0], &data.x[0], &data.y[0]]).unwrap();
    let stat = fit(&table, &schema, &cfg).unwrap();
    // Static margin averages over C ~ N(0,1); the sequential one at C = 0 has the same mean.
    let s = stat.estimate_mean(&[1.0], 50_000, &mut substream(41, Stream::Sampling)).unwrap();
    let q = seq
        .sample_trajectory_interventional(
            &Matrix::filled(1, 1, 1.0),
            &[0.0],
            50_000,
            &mut substream(42, Stream::Sampling),
        )
        .unwrap();
    let q = stats::mean(q[0].data());
    assert!((s - 2.0).abs() <= 0.2, "static {s}");
    assert!((q - 2.0).abs() <= 0.2, "sequential {q}");
}
