//! Time-varying ground truth: four sequential settings with per-step causal
//! margins and Gaussian copulas between the covariate innovations and `Y_t`.
//!
//! Pre-baseline values (`X_{-1}`, `X_{-2}`, `Z_{-1}`) are zero. In survival
//! settings a unit leaves the risk set at its first event; later rows hold
//! `Y = 1` and zero covariates.

use frengression::margin::phi;
use frengression::{Error, Matrix, Result, SeqKind, SeqSchema, TrajectoryBatch};
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::copula::sequential_weights;
use crate::frugal::expit;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LongitudinalSpec {
    pub setting: u8,
    pub horizon: usize,
}

pub fn make_longitudinal(setting: u8) -> Result<LongitudinalSpec> {
    let horizon = match setting {
        1..=3 => 10,
        4 => 5,
        _ => return Err(Error::Config(format!("unknown longitudinal setting {setting}"))),
    };
    Ok(LongitudinalSpec { setting, horizon })
}

/// Noise draws of one step. Kept separate so the same scores can be replayed.
struct StepNoise {
    z: f64,
    x: f64,
    y: f64,
}

impl LongitudinalSpec {
    pub fn with_horizon(self, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        Ok(Self { horizon, ..self })
    }

    pub fn kind(&self) -> SeqKind {
        if self.setting == 4 {
            SeqKind::Seq
        } else {
            SeqKind::Surv
        }
    }

    pub fn schema(&self) -> SeqSchema {
        SeqSchema {
            c_binary: vec![matches!(self.setting, 1 | 3)],
            z_binary: vec![false],
            x_binary: vec![matches!(self.setting, 1 | 2)],
            y_binary: vec![self.setting != 4],
        }
    }

    fn draw_c(&self, rng: &mut impl Rng) -> f64 {
        match self.setting {
            1 | 3 => f64::from(u8::from(rng.random::<f64>() < 0.5)),
            2 => Exp::new(1.0).expect("unit rate").sample(rng),
            _ => rng.sample(StandardNormal),
        }
    }

    /// Conditional mean and sd of `Z_t` given the history.
    fn z_law(&self, t: usize, c: f64, zprev: f64, xprev: f64) -> (f64, f64) {
        match self.setting {
            1 | 3 => (-0.5 + 0.5 * xprev + 0.25 * c, 0.5f64.sqrt()),
            2 if t == 0 => (0.0, 1.0),
            2 => (0.7 * zprev + 0.2 * xprev, 1.0),
            _ => (-0.5 + 0.5 * xprev + 0.5 * zprev + 0.5 * c, 0.5f64.sqrt()),
        }
    }

    fn draw_x(&self, c: f64, z: f64, xprev: f64, noise: f64) -> f64 {
        let bern = |p: f64| f64::from(u8::from(phi(noise) < p));
        match self.setting {
            1 => bern(expit(0.2 * z + 0.1)),
            2 => bern(expit(-0.5 + 0.25 * xprev + 0.5 * z)),
            3 => 1.2 + 0.1 * z + 2.0 * c + 0.1f64.sqrt() * noise,
            _ => 2.0 * z + 0.1 * c + noise,
        }
    }

    /// Rate of the residual lifetime `Y~_t(xbar_t) | C` (survival settings).
    pub fn hazard_rate(&self, x: f64, c: f64) -> f64 {
        match self.setting {
            1 => 0.3 + 0.2 * x + 0.1 * c,
            2 => 0.5 + 0.2 * x + 0.2 * c,
            _ => 0.1 + 0.3 * x + 0.1 * c,
        }
    }

    /// Outcome normal score from the covariate innovations of steps `t` and `t - 1`.
    fn outcome_score(&self, t: usize, u: f64, uprev: f64, eps: f64) -> f64 {
        let link = |partial: &[f64], scores: &[f64]| {
            let (w, sigma) = sequential_weights(partial).expect("fixed partials are valid");
            w.iter().zip(scores).map(|(a, b)| a * b).sum::<f64>() + sigma * eps
        };
        match self.setting {
            1 | 3 => link(&[0.4], &[u]),
            2 if t == 0 => link(&[0.3], &[u]),
            2 => link(&[0.2, 0.3], &[uprev, u]),
            _ => link(&[0.24], &[u]),
        }
    }

    pub fn simulate(&self, n: usize, rng: &mut impl Rng) -> Result<TrajectoryBatch> {
        self.run(n, None, None, rng)
    }

    /// Trajectories under `do(Xbar = regime)`, optionally with `C` held at `c`.
    pub fn simulate_interventional(
        &self,
        regime: &[f64],
        c: Option<f64>,
        n: usize,
        rng: &mut impl Rng,
    ) -> Result<TrajectoryBatch> {
        if regime.len() != self.horizon {
            return Err(Error::Dimension(format!("regime has {} steps, horizon is {}", regime.len(), self.horizon)));
        }
        self.run(n, Some(regime), c, rng)
    }

    fn run(
        &self,
        n: usize,
        regime: Option<&[f64]>,
        c_fixed: Option<f64>,
        rng: &mut impl Rng,
    ) -> Result<TrajectoryBatch> {
        let horizon = self.horizon;
        let surv = self.kind() == SeqKind::Surv;
        let mut c = Matrix::zeros(n, 1);
        let mut z = vec![Matrix::zeros(n, 1); horizon];
        let mut x = vec![Matrix::zeros(n, 1); horizon];
        let mut y = vec![Matrix::zeros(n, 1); horizon];
        for i in 0..n {
            let ci = match c_fixed {
                Some(v) => v,
                None => self.draw_c(rng),
            };
            c.set(i, 0, ci);
            let (mut zprev, mut xprev, mut xprev2, mut uprev) = (0.0, 0.0, 0.0, 0.0);
            let mut alive = true;
            for t in 0..horizon {
                let noise = StepNoise {
                    z: rng.sample(StandardNormal),
                    x: rng.sample(StandardNormal),
                    y: rng.sample(StandardNormal),
                };
                if !alive {
                    y[t].set(i, 0, 1.0);
                    continue;
                }
                let (mz, sz) = self.z_law(t, ci, zprev, xprev);
                let zt = mz + sz * noise.z;
                let xt = match regime {
                    Some(r) => r[t],
                    None => self.draw_x(ci, zt, xprev, noise.x),
                };
                let score = self.outcome_score(t, noise.z, uprev, noise.y);
                let yt = if surv {
                    let rate = self.hazard_rate(xt, ci);
                    if !(rate > 0.0) {
                        return Err(Error::Input(format!(
                            "setting {} hazard rate {rate} at x = {xt}, c = {ci}",
                            self.setting
                        )));
                    }
                    // Residual lifetime Q(Phi(score)) < 1, written without the log.
                    let event = phi(score) < 1.0 - (-rate).exp();
                    alive = !event;
                    f64::from(u8::from(event))
                } else {
                    2.0 * xt + xprev + 0.5 * xprev2 + ci + score
                };
                z[t].set(i, 0, zt);
                x[t].set(i, 0, xt);
                y[t].set(i, 0, yt);
                xprev2 = xprev;
                xprev = xt;
                zprev = zt;
                uprev = noise.z;
            }
        }
        TrajectoryBatch::new(c, z, x, y, self.kind())
    }

    /// `P(Y_t(xbar) = 1)` in closed form for settings whose step scores are
    /// independent across time (1 and 3).
    pub fn event_probability(&self, regime: &[f64], t: usize) -> Result<f64> {
        if !matches!(self.setting, 1 | 3) {
            return Err(Error::Unsupported(format!("setting {} has no closed-form event curve", self.setting)));
        }
        if t >= regime.len() {
            return Err(Error::Dimension(format!("step {t} beyond a regime of {}", regime.len())));
        }
        let survive = |c: f64| (-regime[..=t].iter().map(|&x| self.hazard_rate(x, c)).sum::<f64>()).exp();
        Ok(1.0 - 0.5 * (survive(0.0) + survive(1.0)))
    }

    /// Closed-form `E Y_t(xbar) | C = c` for setting 4.
    pub fn outcome_mean(&self, regime: &[f64], c: f64, t: usize) -> Result<f64> {
        if self.setting != 4 {
            return Err(Error::Unsupported("outcome means are closed form only in setting 4".into()));
        }
        if t >= regime.len() {
            return Err(Error::Dimension(format!("step {t} beyond a regime of {}", regime.len())));
        }
        let lag = |k: usize| if t >= k { regime[t - k] } else { 0.0 };
        Ok(2.0 * lag(0) + lag(1) + 0.5 * lag(2) + c)
    }
}
