//! Behaviour of fitted static models on simple randomized data.

use std::sync::OnceLock;

use frengression::margin::phi_inv;
use frengression::rng::{substream, SimRng, Stream};
use frengression::stats::{self, energy_permutation_test, wasserstein1};
use frengression::{
    fit, ClosedFormMargin, ColumnKind, ColumnSchema, Error, FitConfig, FrengressionModel, Margin, Matrix,
};
use rand::Rng;

const C: ColumnKind = ColumnKind::Continuous;
const B: ColumnKind = ColumnKind::Binary;

/// `Z ~ N(0,1)`, `X ~ Bern(1/2)` independent, `Y = 2X + N(0,1)`.
fn rct(n: usize, rng: &mut SimRng) -> Matrix {
    let mut out = Vec::with_capacity(3 * n);
    for _ in 0..n {
        let z: f64 = rng.sample(rand_distr::StandardNormal);
        let x = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
        let e: f64 = rng.sample(rand_distr::StandardNormal);
        out.extend([z, x, 2.0 * x + e]);
    }
    Matrix::new(n, 3, out).unwrap()
}

fn rct_schema() -> ColumnSchema {
    ColumnSchema::simple(&[C], &[B], &[C]).unwrap()
}

fn small_config(seed: u64) -> FitConfig {
    FitConfig { hidden_width: 32, seed, ..FitConfig::default() }
}

struct Fitted {
    data: Matrix,
    model: FrengressionModel,
}

fn fitted() -> &'static Fitted {
    static CELL: OnceLock<Fitted> = OnceLock::new();
    CELL.get_or_init(|| {
        let data = rct(5000, &mut substream(100, Stream::Data));
        let model = fit(&data, &rct_schema(), &small_config(100)).unwrap();
        Fitted { data, model }
    })
}

#[test]
fn ate_recovers_the_treatment_effect() {
    let est = fitted().model.estimate_ate(&[1.0], &[0.0], 100_000, &mut substream(1, Stream::Sampling)).unwrap();
    assert!((est.ate - 2.0).abs() <= 0.1, "{est:?}");
}

#[test]
fn interventional_draws_have_true_moments() {
    let y = fitted().model.sample_interventional(&[1.0], 100_000, &mut substream(2, Stream::Sampling)).unwrap();
    let (m, s) = (stats::mean(y.data()), stats::sd(y.data()));
    assert!((m - 2.0).abs() <= 0.1, "mean {m}");
    assert!((s - 1.0).abs() <= 0.1, "sd {s}");
}

#[test]
fn interventional_quantiles_match_gaussian_oracle() {
    let model = &fitted().model;
    let med = model.estimate_quantile(&[1.0], 0.5, 100_000, &mut substream(3, Stream::Sampling)).unwrap();
    let hi = model.estimate_quantile(&[1.0], 0.975, 100_000, &mut substream(3, Stream::Sampling)).unwrap();
    assert!((med - 2.0).abs() <= 0.1, "median {med}");
    assert!((hi - (2.0 + phi_inv(0.975))).abs() <= 0.15, "upper {hi}");
    assert!(matches!(
        model.estimate_quantile(&[1.0], 1.0, 10, &mut substream(3, Stream::Sampling)),
        Err(Error::AlphaRange(_))
    ));
}

#[test]
fn quantiles_are_monotone_in_alpha() {
    let y = fitted().model.sample_interventional(&[0.0], 5000, &mut substream(4, Stream::Sampling)).unwrap();
    let qs: Vec<f64> = (1..100).map(|k| stats::quantile(y.data(), k as f64 / 100.0).unwrap()).collect();
    assert!(qs.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn past_draws_match_training_moments() {
    let Fitted { data, model } = fitted();
    let past = model.sample_past(10_000, &mut substream(5, Stream::Sampling)).unwrap();
    let (z, x) = (past.col(0), past.col(1));
    assert!(x.iter().all(|&v| v == 0.0 || v == 1.0));
    let freq = stats::mean(&x);
    let train_freq = stats::mean(&data.col(1));
    assert!((freq - train_freq).abs() <= 0.05, "{freq} vs {train_freq}");
    let r = stats::correlation(&z, &x);
    let train_r = stats::correlation(&data.col(0), &data.col(1));
    assert!((r - train_r).abs() <= 0.1, "{r} vs {train_r}");
}

#[test]
fn joint_draws_match_conditional_mean() {
    let joint = fitted().model.sample_joint(20_000, &mut substream(6, Stream::Sampling)).unwrap();
    let treated: Vec<f64> = joint.iter_rows().filter(|r| r[1] == 1.0).map(|r| r[2]).collect();
    let m = stats::mean(&treated);
    assert!((m - 2.0).abs() <= 0.15, "E[Y | X = 1] = {m}");
}

#[test]
fn joint_draws_are_close_to_held_out_data() {
    let model = &fitted().model;
    let sim = model.sample_joint(1000, &mut substream(7, Stream::Sampling)).unwrap();
    let a = rct(1000, &mut substream(7, Stream::Data));
    let b = rct(1000, &mut substream(8, Stream::Data));
    let sim_real = frengression::losses::energy_distance(&sim, &a).unwrap();
    let real_real = frengression::losses::energy_distance(&b, &a).unwrap();
    assert!(sim_real <= real_real + 0.05 * 2.0, "{sim_real} vs baseline {real_real}");
}

#[test]
fn sampling_is_deterministic_and_handles_empty_requests() {
    let model = &fitted().model;
    let a = model.sample_joint(50, &mut substream(9, Stream::Sampling)).unwrap();
    let b = model.sample_joint(50, &mut substream(9, Stream::Sampling)).unwrap();
    assert_eq!(a, b);
    let mut rng = substream(9, Stream::Sampling);
    assert_eq!(model.sample_past(0, &mut rng).unwrap().shape(), (0, 2));
    assert_eq!(model.sample_joint(0, &mut rng).unwrap().shape(), (0, 3));
    assert_eq!(model.sample_swig(&[1.0], 0, &mut rng).unwrap().shape(), (0, 3));
    assert_eq!(model.sample_interventional(&[1.0], 0, &mut rng).unwrap().shape(), (0, 1));
}

#[test]
fn interventional_law_is_continuous_in_x() {
    let model = &fitted().model;
    let step = 0.1;
    let mut prev = model.sample_interventional(&[0.0], 20_000, &mut substream(10, Stream::Sampling)).unwrap();
    for k in 1..=10 {
        let cur =
            model.sample_interventional(&[k as f64 * step], 20_000, &mut substream(10 + k, Stream::Sampling)).unwrap();
        let w = wasserstein1(prev.data(), cur.data());
        assert!(w <= 4.0 * step + 0.05, "W1 {w} at step {k}");
        prev = cur;
    }
}

#[test]
fn margin_replacement_keeps_past_and_dependence_nets() {
    let model = &fitted().model;
    let swapped = model.replace_margin(Margin::ClosedForm(ClosedFormMargin::gaussian(0.0, 5.0, 1.0))).unwrap();
    assert_eq!(swapped.g().unwrap().to_bytes(), model.g().unwrap().to_bytes());
    assert_eq!(swapped.h().to_bytes(), model.h().to_bytes());
    let joint = swapped.sample_joint(20_000, &mut substream(30, Stream::Sampling)).unwrap();
    let treated: Vec<f64> = joint.iter_rows().filter(|r| r[1] == 1.0).map(|r| r[2]).collect();
    assert!((stats::mean(&treated) - 5.0).abs() <= 0.15);

    let laplace = model.replace_margin(Margin::ClosedForm(ClosedFormMargin::laplace(0.0, 2.0, 0.5))).unwrap();
    let joint = laplace.sample_joint(20_000, &mut substream(31, Stream::Sampling)).unwrap();
    let treated: Vec<f64> = joint.iter_rows().filter(|r| r[1] == 1.0).map(|r| r[2]).collect();
    let med = stats::quantile(&treated, 0.5).unwrap();
    assert!((med - 2.0).abs() <= 0.1, "median {med}");

    let before = model.sample_joint(500, &mut substream(32, Stream::Sampling)).unwrap().slice_cols(0, 2).unwrap();
    let after = laplace.sample_joint(500, &mut substream(33, Stream::Sampling)).unwrap().slice_cols(0, 2).unwrap();
    let t = energy_permutation_test(&before, &after, 199, &mut substream(32, Stream::Permutation)).unwrap();
    assert!(t.p_value > 0.05, "p = {}", t.p_value);
}

#[test]
fn margin_replacement_rejects_wrong_dimensions() {
    let bad = Margin::ClosedForm(ClosedFormMargin::Gaussian {
        loc: frengression::margin::Affine::new(0.0, vec![1.0, 1.0]),
        sd: 1.0,
    });
    assert!(matches!(fitted().model.replace_margin(bad), Err(Error::Dimension(_))));
}

#[test]
fn two_row_dataset_fits_without_nan() {
    let data = Matrix::from_rows(&[[0.0, 0.0, -1.0], [1.0, 1.0, 1.0]]).unwrap();
    let cfg = FitConfig { epochs: 50, hidden_width: 8, ..FitConfig::default() };
    let model = fit(&data, &rct_schema(), &cfg).unwrap();
    let joint = model.sample_joint(200, &mut substream(40, Stream::Sampling)).unwrap();
    assert!(joint.data().iter().all(|v| v.is_finite()));
    assert!(model.log().fh.iter().all(|v| v.is_finite()));
}

#[test]
fn invalid_data_is_rejected() {
    let cfg = FitConfig { epochs: 1, ..small_config(0) };
    let nan = Matrix::from_rows(&[[0.0, 0.0, f64::NAN], [1.0, 1.0, 1.0]]).unwrap();
    assert!(matches!(fit(&nan, &rct_schema(), &cfg), Err(Error::Input(_))));
    let nonbinary = Matrix::from_rows(&[[0.0, 0.5, 1.0], [1.0, 1.0, 1.0]]).unwrap();
    assert!(matches!(fit(&nonbinary, &rct_schema(), &cfg), Err(Error::Input(_))));
}

/// `Y = (X + eta)^3`, `eta ~ N(0, 1/4)`, `X ~ Unif[-1, 1]`: the median is `x^3`.
#[test]
fn pre_anm_median_matches_cube_in_support() {
    let mut rng = substream(50, Stream::Data);
    let n = 5000;
    let mut out = Vec::with_capacity(3 * n);
    for _ in 0..n {
        let z: f64 = rng.sample(rand_distr::StandardNormal);
        let x: f64 = rng.random_range(-1.0..1.0);
        let eta = 0.5 * rng.sample::<f64, _>(rand_distr::StandardNormal);
        out.extend([z, x, (x + eta).powi(3)]);
    }
    let data = Matrix::new(n, 3, out).unwrap();
    let schema = ColumnSchema::simple(&[C], &[C], &[C]).unwrap();
    let cfg = FitConfig {
        pre_anm: true,
        fit_past: false,
        lr: 2e-3,
        epochs: 2000,
        m: 4,
        batch_size: 512,
        lr_final_ratio: 0.01,
        ..small_config(50)
    };
    let model = fit(&data, &schema, &cfg).unwrap();
    let xs: Vec<f64> = (0..=8).map(|k| -1.0 + 0.25 * k as f64).collect();
    let med = model.median_curve(&xs, 20_000, &mut substream(50, Stream::Sampling)).unwrap();
    let worst = xs.iter().zip(&med).map(|(x, m)| (m - x.powi(3)).abs()).fold(0.0, f64::max);
    assert!(worst <= 0.15, "max error {worst}: {med:?}");
    let Margin::PreAnm(p) = model.f() else { panic!("expected a pre-ANM margin") };
    let (so, sn) = p.min_slopes(-5.0, 5.0, 101).unwrap();
    assert!(so >= -1e-6 && sn >= -1e-6, "slopes {so} {sn}");
}
