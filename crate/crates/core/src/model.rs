//! The static model: two-stage fitting, sampling procedures, margin
//! replacement and sampling-based inference.

use ndiff::Matrix;
use rand::Rng;

use crate::nets::{GeneratorNet, Margin, MlpSpec, PreAnmMargin, Role};
use crate::rng::{standard_normal, substream, Stream};
use crate::schema::ColumnSchema;
use crate::stats;
use crate::train::{fit_engression, fit_outcome, OutcomeData, TrainSettings, ZPrimeKind};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub epochs: usize,
    pub lr: f64,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    /// Noise draws per observation in every loss.
    pub m: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Fit the past generator `g`. Estimating interventional quantities only
    /// needs `f`, so callers may skip it.
    pub fit_past: bool,
    /// Use the monotone `f(x + f1(eta))` margin (scalar treatment and outcome).
    pub pre_anm: bool,
    /// Weight of the pre-ANM monotonicity hinge.
    pub monotone_penalty: f64,
    /// Final learning rate as a fraction of `lr` (cosine decay); 1 keeps it constant.
    pub lr_final_ratio: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            lr: 1e-4,
            hidden_layers: 3,
            hidden_width: 100,
            m: 2,
            batch_size: 256,
            seed: 0,
            fit_past: true,
            pre_anm: false,
            monotone_penalty: 1.0,
            lr_final_ratio: 1.0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::DegenerateSample { needed: 2, got: self.m });
        }
        if self.batch_size == 0 || self.hidden_layers == 0 || self.hidden_width == 0 {
            return Err(Error::Config(format!("invalid fit configuration {self:?}")));
        }
        if !(self.lr_final_ratio > 0.0 && self.lr_final_ratio <= 1.0) {
            return Err(Error::Config(format!("final learning-rate ratio {} must lie in (0, 1]", self.lr_final_ratio)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.lr)));
        }
        Ok(())
    }

    pub(crate) fn settings(&self) -> TrainSettings {
        TrainSettings {
            epochs: self.epochs,
            lr: self.lr,
            m: self.m,
            batch_size: self.batch_size,
            monotone_penalty: self.monotone_penalty,
            lr_final_ratio: self.lr_final_ratio,
        }
    }

    pub(crate) fn mlp(&self, in_dim: usize, out_dim: usize) -> MlpSpec {
        MlpSpec::new(in_dim, out_dim).with_hidden(self.hidden_layers, self.hidden_width)
    }
}

/// Mean training loss per epoch for each fitted component.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub g: Vec<f64>,
    pub e: Vec<f64>,
    pub fh: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AteEstimate {
    pub ate: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrengressionModel {
    pub(crate) schema: ColumnSchema,
    pub(crate) g: Option<GeneratorNet>,
    pub(crate) f: Margin,
    pub(crate) h: GeneratorNet,
    pub(crate) e: Option<GeneratorNet>,
    pub(crate) log: TrainingLog,
}

/// Splits `[Z | X | Y]` into its blocks.
pub fn split_blocks(data: &Matrix, schema: &ColumnSchema) -> Result<(Matrix, Matrix, Matrix)> {
    if data.cols() != schema.width() {
        return Err(Error::Dimension(format!("data has {} columns, schema declares {}", data.cols(), schema.width())));
    }
    let (dz, dx) = (schema.d_z(), schema.d_x());
    Ok((data.slice_cols(0, dz)?, data.slice_cols(dz, dx)?, data.slice_cols(dz + dx, schema.d_y())?))
}

pub fn validate_data(data: &Matrix, schema: &ColumnSchema) -> Result<()> {
    if data.cols() != schema.width() {
        return Err(Error::Dimension(format!("data has {} columns, schema declares {}", data.cols(), schema.width())));
    }
    if data.rows() < 2 {
        return Err(Error::DegenerateSample { needed: 2, got: data.rows() });
    }
    if let Some(i) = data.data().iter().position(|v| !v.is_finite()) {
        return Err(Error::Input(format!("non-finite value at row {}, column {}", i / data.cols(), i % data.cols())));
    }
    for (c, col) in schema.columns().enumerate() {
        if col.kind == crate::schema::ColumnKind::Binary {
            if let Some(r) = (0..data.rows()).find(|&r| !matches!(data.get(r, c), v if v == 0.0 || v == 1.0)) {
                return Err(Error::Input(format!("binary column {} holds {} at row {r}", col.name, data.get(r, c))));
            }
        }
    }
    Ok(())
}

/// Thresholds raw generator output at 0.5 in the listed columns.
pub(crate) fn threshold_columns(m: &mut Matrix, cols: &[usize]) {
    for r in 0..m.rows() {
        for &c in cols {
            let v = m.get(r, c);
            m.set(r, c, if v >= 0.5 { 1.0 } else { 0.0 });
        }
    }
}

/// Rounds raw outcome values to {0, 1} with probability `clamp(v, 0, 1)`,
/// which keeps the event rate of the generator.
pub(crate) fn round_columns(m: &mut Matrix, cols: &[usize], rng: &mut impl Rng) {
    for r in 0..m.rows() {
        for &c in cols {
            let p = m.get(r, c).clamp(0.0, 1.0);
            let u: f64 = rng.random();
            m.set(r, c, if u < p { 1.0 } else { 0.0 });
        }
    }
}

pub(crate) fn repeat_point(x: &[f64], n: usize) -> Matrix {
    Matrix::from_fn(n, x.len(), |_, c| x[c])
}

/// Fits a frengression model to rows laid out as `[Z | X | Y]`.
pub fn fit(data: &Matrix, schema: &ColumnSchema, cfg: &FitConfig) -> Result<FrengressionModel> {
    cfg.validate()?;
    schema.validate()?;
    validate_data(data, schema)?;
    let (dz, dx, dy) = (schema.d_z(), schema.d_x(), schema.d_y());
    if cfg.pre_anm && (dx != 1 || dy != 1) {
        return Err(Error::Unsupported("the pre-ANM margin needs scalar treatment and outcome".into()));
    }
    let (z, x, y) = split_blocks(data, schema)?;
    let s = cfg.settings();
    let mut init = substream(cfg.seed, Stream::Init);
    let mut shuffle = substream(cfg.seed, Stream::Shuffle);
    let mut log = TrainingLog::default();

    let g = if cfg.fit_past {
        let mut g = GeneratorNet::new(Role::PastG, 0, dz + dx, cfg.mlp(dz + dx, dz + dx), &mut init)?;
        let past = Matrix::hcat(&[&z, &x])?;
        let mut noise = substream(cfg.seed, Stream::PastNoise);
        log.g = fit_engression(&mut g, None, &past, &s, "g", &mut shuffle, &mut noise)?;
        Some(g)
    } else {
        None
    };

    let mut f = if cfg.pre_anm {
        Margin::PreAnm(PreAnmMargin::new(cfg.hidden_layers, cfg.hidden_width, &mut init)?)
    } else {
        Margin::Net(GeneratorNet::new(Role::MarginF, dx, dy, cfg.mlp(dx + dy, dy), &mut init)?)
    };
    let mut h = GeneratorNet::new(Role::CopulaH, dz + dx, dy, cfg.mlp(dz + dx + dy, dy), &mut init)?;

    let x0 = if schema.has_x0() { Some(x.select_cols(&schema.x0)?) } else { None };
    let e = match &x0 {
        Some(x0) => {
            let d0 = x0.cols();
            let mut e = GeneratorNet::new(Role::AuxE, d0, dz, cfg.mlp(d0 + dz, dz), &mut init)?;
            let mut noise = substream(cfg.seed, Stream::AuxNoise);
            log.e = fit_engression(&mut e, Some(x0), &z, &s, "e", &mut shuffle, &mut noise)?;
            Some(e)
        }
        None => None,
    };

    let zsrc = match (&e, &x0) {
        (Some(e), Some(cond)) => ZPrimeKind::Aux { e, cond },
        _ => ZPrimeKind::Permutation,
    };
    let out = OutcomeData { base: None, z: &z, x: &x, y: &y };
    let mut noise = substream(cfg.seed, Stream::OutcomeNoise);
    let mut perm = substream(cfg.seed, Stream::Permutation);
    log.fh = fit_outcome(&mut f, &mut h, &out, &zsrc, &s, "f,h", &mut shuffle, &mut noise, &mut perm)?;

    Ok(FrengressionModel { schema: schema.clone(), g, f, h, e, log })
}

impl FrengressionModel {
    /// Assembles a model from given components after checking their shapes.
    pub fn from_parts(
        schema: ColumnSchema,
        g: Option<GeneratorNet>,
        f: Margin,
        h: GeneratorNet,
        e: Option<GeneratorNet>,
    ) -> Result<Self> {
        schema.validate()?;
        let (dz, dx, dy) = (schema.d_z(), schema.d_x(), schema.d_y());
        if let Some(g) = &g {
            g.check_role(Role::PastG)?;
            if g.noise_dim() != dz + dx || g.out_dim() != dz + dx || g.cond_dim() != 0 {
                return Err(Error::Dimension("g must map N(0, I_{dz+dx}) to (Z, X)".into()));
            }
        }
        h.check_role(Role::CopulaH)?;
        if h.cond_dim() != dz + dx || h.noise_dim() != dy || h.out_dim() != dy {
            return Err(Error::Dimension("h must map (z, x, xi) to a d_y noise".into()));
        }
        Self::check_margin(&schema, &f)?;
        match (&e, schema.has_x0()) {
            (Some(e), true) => {
                e.check_role(Role::AuxE)?;
                if e.cond_dim() != schema.x0.len() || e.out_dim() != dz {
                    return Err(Error::Dimension("e must map (x0, zeta) to Z".into()));
                }
            }
            (None, false) => {}
            (Some(_), false) => return Err(Error::Config("an auxiliary model needs declared X0 columns".into())),
            (None, true) => return Err(Error::Config("declared X0 columns need an auxiliary model".into())),
        }
        Ok(Self { schema, g, f, h, e, log: TrainingLog::default() })
    }

    fn check_margin(schema: &ColumnSchema, f: &Margin) -> Result<()> {
        if f.x_dim() != schema.d_x() || f.y_dim() != schema.d_y() {
            return Err(Error::Dimension(format!(
                "margin maps {} treatments to {} outcomes; schema has {} and {}",
                f.x_dim(),
                f.y_dim(),
                schema.d_x(),
                schema.d_y()
            )));
        }
        if let Margin::Net(n) = f {
            n.check_role(Role::MarginF)?;
        }
        Ok(())
    }

    pub fn schema(&self) -> &ColumnSchema {
        &self.schema
    }

    pub fn g(&self) -> Option<&GeneratorNet> {
        self.g.as_ref()
    }

    pub fn f(&self) -> &Margin {
        &self.f
    }

    pub fn h(&self) -> &GeneratorNet {
        &self.h
    }

    pub fn e(&self) -> Option<&GeneratorNet> {
        self.e.as_ref()
    }

    pub fn log(&self) -> &TrainingLog {
        &self.log
    }

    fn past_net(&self) -> Result<&GeneratorNet> {
        self.g.as_ref().ok_or_else(|| Error::Contract("the past generator was not fitted".into()))
    }

    /// `(Z, X) = g(eps)` with binary columns thresholded.
    pub fn sample_past(&self, n: usize, rng: &mut impl Rng) -> Result<Matrix> {
        let g = self.past_net()?;
        let w = self.schema.d_z() + self.schema.d_x();
        if n == 0 {
            return Ok(Matrix::zeros(0, w));
        }
        let mut out = g.eval(&standard_normal(n, w, rng))?;
        threshold_columns(&mut out, &self.schema.binary_past());
        Ok(out)
    }

    fn outcome(&self, x: &Matrix, eta: &Matrix, rng: &mut impl Rng) -> Result<Matrix> {
        let mut y = self.f.eval(x, eta)?;
        round_columns(&mut y, &self.schema.binary_outcomes(), rng);
        Ok(y)
    }

    /// `n` draws of `f(x, eta)` with `eta ~ N(0, I)`.
    pub fn sample_interventional(&self, x: &[f64], n: usize, rng: &mut impl Rng) -> Result<Matrix> {
        if x.len() != self.schema.d_x() {
            return Err(Error::Dimension(format!("treatment has {} entries, expected {}", x.len(), self.schema.d_x())));
        }
        let dy = self.schema.d_y();
        if n == 0 {
            return Ok(Matrix::zeros(0, dy));
        }
        let eta = standard_normal(n, self.f.noise_dim(), rng);
        self.outcome(&repeat_point(x, n), &eta, rng)
    }

    fn past_and_noise(&self, n: usize, rng: &mut impl Rng) -> Result<(Matrix, Matrix, Matrix)> {
        let past = self.sample_past(n, rng)?;
        let (dz, dx) = (self.schema.d_z(), self.schema.d_x());
        let z = past.slice_cols(0, dz)?;
        let x = past.slice_cols(dz, dx)?;
        let xi = standard_normal(n, self.schema.d_y(), rng);
        let eta = self.h.eval_parts(&[&z, &x], &xi)?;
        Ok((z, x, eta))
    }

    /// Chains `g -> h -> f` for draws from the observational joint law.
    pub fn sample_joint(&self, n: usize, rng: &mut impl Rng) -> Result<Matrix> {
        if n == 0 {
            return Ok(Matrix::zeros(0, self.schema.width()));
        }
        let (z, x, eta) = self.past_and_noise(n, rng)?;
        let y = self.outcome(&x, &eta, rng)?;
        Ok(Matrix::hcat(&[&z, &x, &y])?)
    }

    /// Observed past `(Z, X)` with the outcome set under treatment `x_prime`.
    pub fn sample_swig(&self, x_prime: &[f64], n: usize, rng: &mut impl Rng) -> Result<Matrix> {
        if x_prime.len() != self.schema.d_x() {
            return Err(Error::Dimension(format!(
                "treatment has {} entries, expected {}",
                x_prime.len(),
                self.schema.d_x()
            )));
        }
        if n == 0 {
            return Ok(Matrix::zeros(0, self.schema.width()));
        }
        let (z, x, eta) = self.past_and_noise(n, rng)?;
        let y = self.outcome(&repeat_point(x_prime, n), &eta, rng)?;
        Ok(Matrix::hcat(&[&z, &x, &y])?)
    }

    /// Swaps the causal margin, leaving `g`, `h` and `e` untouched.
    pub fn replace_margin(&self, new_f: Margin) -> Result<Self> {
        Self::check_margin(&self.schema, &new_f)?;
        Ok(Self { f: new_f, ..self.clone() })
    }

    fn scalar_outcome(&self) -> Result<()> {
        if self.schema.d_y() != 1 {
            return Err(Error::Unsupported("scalar summaries need a single outcome column".into()));
        }
        Ok(())
    }

    /// `E Y(x1) - E Y(x0)` by Monte Carlo, with its standard error.
    pub fn estimate_ate(&self, x1: &[f64], x0: &[f64], n: usize, rng: &mut impl Rng) -> Result<AteEstimate> {
        self.scalar_outcome()?;
        if n < 2 {
            return Err(Error::DegenerateSample { needed: 2, got: n });
        }
        let a = self.sample_interventional(x1, n, rng)?.into_vec();
        let b = self.sample_interventional(x0, n, rng)?.into_vec();
        Ok(AteEstimate {
            ate: stats::mean(&a) - stats::mean(&b),
            se: (stats::variance(&a) / n as f64 + stats::variance(&b) / n as f64).sqrt(),
        })
    }

    /// Mean of `n` interventional draws at `x`.
    pub fn estimate_mean(&self, x: &[f64], n: usize, rng: &mut impl Rng) -> Result<f64> {
        self.scalar_outcome()?;
        if n == 0 {
            return Err(Error::DegenerateSample { needed: 1, got: 0 });
        }
        Ok(stats::mean(self.sample_interventional(x, n, rng)?.data()))
    }

    /// Empirical `alpha`-quantile of `n` interventional draws at `x`.
    pub fn estimate_quantile(&self, x: &[f64], alpha: f64, n: usize, rng: &mut impl Rng) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::AlphaRange(alpha));
        }
        self.scalar_outcome()?;
        stats::quantile(self.sample_interventional(x, n, rng)?.data(), alpha)
    }

    /// Median of `f(x, eta)` over `n` draws, at each treatment in `xs`.
    pub fn median_curve(&self, xs: &[f64], n: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
        xs.iter().map(|&x| self.estimate_quantile(&[x], 0.5, n, rng)).collect()
    }
}
