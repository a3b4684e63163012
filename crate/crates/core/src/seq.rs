//! Sequential frengression for longitudinal and survival data.
//!
//! Time step `t` owns `g_t(c, zbar_{t-1}, xbar_{t-1}, eps)`,
//! `f_t(c, xbar_t, eta)`, `h_t(c, zbar_t, xbar_t, xi)` and, for `t >= 1`, an
//! auxiliary `e_t(c, xbar_{t-1}, zeta)` emitting the covariate history
//! `zbar_t`. Histories are flat concatenations, so input widths grow with `t`.

use ndiff::Matrix;
use rand::Rng;

use crate::model::{repeat_point, round_columns, threshold_columns, FitConfig};
use crate::nets::{GeneratorNet, Margin, Role};
use crate::rng::{standard_normal, substream, Stream};
use crate::train::{fit_engression, fit_outcome, OutcomeData, ZPrimeKind};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqKind {
    /// Longitudinal outcomes observed at every step.
    Seq,
    /// Cumulative binary event indicators; units leave the risk set after an event.
    Surv,
}

/// Block widths and binary flags of a trajectory layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeqSchema {
    pub c_binary: Vec<bool>,
    pub z_binary: Vec<bool>,
    pub x_binary: Vec<bool>,
    pub y_binary: Vec<bool>,
}

impl SeqSchema {
    pub fn d_c(&self) -> usize {
        self.c_binary.len()
    }

    pub fn d_z(&self) -> usize {
        self.z_binary.len()
    }

    pub fn d_x(&self) -> usize {
        self.x_binary.len()
    }

    pub fn d_y(&self) -> usize {
        self.y_binary.len()
    }

    fn validate(&self) -> Result<()> {
        if self.d_c() == 0 || self.d_z() == 0 || self.d_x() == 0 || self.d_y() == 0 {
            return Err(Error::Config("every trajectory block needs a column".into()));
        }
        Ok(())
    }

    fn indices(flags: &[bool]) -> Vec<usize> {
        flags.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
    }
}

/// Rectangular trajectories `(C, Z_t, X_t, Y_t)` for `t < T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBatch {
    pub c: Matrix,
    pub z: Vec<Matrix>,
    pub x: Vec<Matrix>,
    pub y: Vec<Matrix>,
    /// `at_risk[t][i]`: unit `i` has had no event before step `t`.
    pub at_risk: Vec<Vec<bool>>,
    pub kind: SeqKind,
}

impl TrajectoryBatch {
    /// Builds a batch, deriving risk sets from the outcome indicators for survival data.
    pub fn new(c: Matrix, z: Vec<Matrix>, x: Vec<Matrix>, y: Vec<Matrix>, kind: SeqKind) -> Result<Self> {
        let n = c.rows();
        let horizon = y.len();
        if horizon == 0 || z.len() != horizon || x.len() != horizon {
            return Err(Error::Input("Z, X and Y need the same nonzero number of steps".into()));
        }
        for blk in z.iter().chain(&x).chain(&y) {
            if blk.rows() != n {
                return Err(Error::Dimension(format!("block with {} rows, baseline has {n}", blk.rows())));
            }
        }
        let mut at_risk = vec![vec![true; n]; horizon];
        if kind == SeqKind::Surv {
            if y[0].cols() != 1 {
                return Err(Error::Input("survival outcomes are single event indicators".into()));
            }
            for t in 0..horizon {
                for i in 0..n {
                    let v = y[t].get(i, 0);
                    if v != 0.0 && v != 1.0 {
                        return Err(Error::Input(format!("event indicator {v} at unit {i}, step {t}")));
                    }
                    if t > 0 {
                        let before = y[t - 1].get(i, 0);
                        at_risk[t][i] = before == 0.0;
                        if before == 1.0 && v != 1.0 {
                            return Err(Error::Input(format!("unit {i} leaves the event state at step {t}")));
                        }
                    }
                }
            }
        }
        Ok(Self { c, z, x, y, at_risk, kind })
    }

    pub fn len(&self) -> usize {
        self.c.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.c.rows() == 0
    }

    pub fn horizon(&self) -> usize {
        self.y.len()
    }

    /// First step with an event, as a time in `1..=T`; `None` if censored at `T`.
    pub fn event_times(&self) -> Vec<Option<usize>> {
        (0..self.len()).map(|i| (0..self.horizon()).find(|&t| self.y[t].get(i, 0) == 1.0).map(|t| t + 1)).collect()
    }

    pub fn at_risk_counts(&self) -> Vec<usize> {
        self.at_risk.iter().map(|r| r.iter().filter(|&&b| b).count()).collect()
    }

    fn rows_at_risk(&self, t: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.at_risk[t][i]).collect()
    }

    /// `[Z_0 .. Z_t]` for the selected rows.
    pub fn z_history(&self, t: usize, rows: &[usize]) -> Result<Matrix> {
        history(&self.z[..=t], rows)
    }

    /// `[X_0 .. X_t]` for the selected rows.
    pub fn x_history(&self, t: usize, rows: &[usize]) -> Result<Matrix> {
        history(&self.x[..=t], rows)
    }
}

fn history(blocks: &[Matrix], rows: &[usize]) -> Result<Matrix> {
    let picked: Vec<Matrix> = blocks.iter().map(|b| b.select_rows(rows)).collect::<ndiff::Result<_>>()?;
    let refs: Vec<&Matrix> = picked.iter().collect();
    Ok(Matrix::hcat(&refs)?)
}

fn cat(parts: &[&Matrix]) -> Result<Matrix> {
    crate::nets::concat(parts)
}

/// Components of one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqStep {
    pub g: Option<GeneratorNet>,
    pub f: Margin,
    pub h: GeneratorNet,
    pub e: Option<GeneratorNet>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeqLog {
    pub g_c: Vec<f64>,
    pub g: Vec<Vec<f64>>,
    pub e: Vec<Vec<f64>>,
    pub fh: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeqModel {
    pub(crate) schema: SeqSchema,
    pub(crate) kind: SeqKind,
    pub(crate) g_c: GeneratorNet,
    pub(crate) steps: Vec<SeqStep>,
    pub(crate) log: SeqLog,
}

/// Number of baseline strata used to permute `Z_0` within similar `C`.
const C_STRATA: usize = 8;

/// Stratum labels from the first baseline column: its distinct values when
/// there are at most [`C_STRATA`], otherwise equal-count quantile bins.
fn baseline_strata(c: &Matrix) -> Vec<usize> {
    let col = c.col(0);
    let mut distinct = col.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() <= C_STRATA {
        return col.iter().map(|v| distinct.iter().position(|d| d == v).expect("value is present")).collect();
    }
    let mut order: Vec<usize> = (0..col.len()).collect();
    order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
    let mut labels = vec![0; col.len()];
    for (rank, &i) in order.iter().enumerate() {
        labels[i] = rank * C_STRATA / col.len();
    }
    labels
}

/// Fits `g_c` and every time step. Survival steps are trained on the units
/// still at risk; the horizon is truncated at the first step with fewer
/// than two such units.
pub fn fit_seq(data: &TrajectoryBatch, schema: &SeqSchema, cfg: &FitConfig) -> Result<SeqModel> {
    cfg.validate()?;
    schema.validate()?;
    if data.c.cols() != schema.d_c()
        || data.z[0].cols() != schema.d_z()
        || data.x[0].cols() != schema.d_x()
        || data.y[0].cols() != schema.d_y()
    {
        return Err(Error::Dimension("trajectory blocks do not match the schema".into()));
    }
    if data.len() < 2 {
        return Err(Error::DegenerateSample { needed: 2, got: data.len() });
    }
    let (dc, dz, dx, dy) = (schema.d_c(), schema.d_z(), schema.d_x(), schema.d_y());
    let s = cfg.settings();
    let mut init = substream(cfg.seed, Stream::Init);
    let mut log = SeqLog::default();

    let mut g_c = GeneratorNet::new(Role::BaselineGc, 0, dc, cfg.mlp(dc, dc), &mut init)?;
    {
        let mut shuffle = substream(cfg.seed, Stream::Shuffle);
        let mut noise = substream(cfg.seed, Stream::PastNoise);
        log.g_c = fit_engression(&mut g_c, None, &data.c, &s, "g_c", &mut shuffle, &mut noise)?;
    }

    let mut steps = Vec::with_capacity(data.horizon());
    for t in 0..data.horizon() {
        let rows = data.rows_at_risk(t);
        if rows.len() < 2 {
            log::warn!("only {} units at risk at step {t}; truncating the horizon to {t}", rows.len());
            break;
        }
        let seed = crate::rng::child_seed(cfg.seed, Stream::Step(t as u64));
        let mut shuffle = substream(seed, Stream::Shuffle);
        let c = data.c.select_rows(&rows)?;
        let zbar = data.z_history(t, &rows)?;
        let xbar = data.x_history(t, &rows)?;
        let zt = data.z[t].select_rows(&rows)?;
        let xt = data.x[t].select_rows(&rows)?;
        let yt = data.y[t].select_rows(&rows)?;
        let prev = if t > 0 { Some((data.z_history(t - 1, &rows)?, data.x_history(t - 1, &rows)?)) } else { None };

        let g = if cfg.fit_past {
            let cond = match &prev {
                Some((zp, xp)) => cat(&[&c, zp, xp])?,
                None => c.clone(),
            };
            let w = dz + dx;
            let mut g = GeneratorNet::new(Role::PastG, cond.cols(), w, cfg.mlp(cond.cols() + w, w), &mut init)?;
            let mut noise = substream(seed, Stream::PastNoise);
            let target = cat(&[&zt, &xt])?;
            let l = fit_engression(&mut g, Some(&cond), &target, &s, &format!("g_{t}"), &mut shuffle, &mut noise)?;
            log.g.push(l);
            Some(g)
        } else {
            None
        };

        let e_cond = match &prev {
            Some((_, xp)) => Some(cat(&[&c, xp])?),
            None => None,
        };
        let e = match &e_cond {
            Some(cond) => {
                let w = zbar.cols();
                let mut e = GeneratorNet::new(Role::AuxE, cond.cols(), w, cfg.mlp(cond.cols() + w, w), &mut init)?;
                let mut noise = substream(seed, Stream::AuxNoise);
                let l = fit_engression(&mut e, Some(cond), &zbar, &s, &format!("e_{t}"), &mut shuffle, &mut noise)?;
                log.e.push(l);
                Some(e)
            }
            None => None,
        };

        let fc = dc + xbar.cols();
        let mut f = Margin::Net(GeneratorNet::new(Role::MarginF, fc, dy, cfg.mlp(fc + dy, dy), &mut init)?);
        let hc = dc + zbar.cols() + xbar.cols();
        let mut h = GeneratorNet::new(Role::CopulaH, hc, dy, cfg.mlp(hc + dy, dy), &mut init)?;
        let strata = baseline_strata(&c);
        let zsrc = match (&e, &e_cond) {
            (Some(e), Some(cond)) => ZPrimeKind::Aux { e, cond },
            _ => ZPrimeKind::Stratified(&strata),
        };
        let out = OutcomeData { base: Some(&c), z: &zbar, x: &xbar, y: &yt };
        let mut noise = substream(seed, Stream::OutcomeNoise);
        let mut perm = substream(seed, Stream::Permutation);
        let l =
            fit_outcome(&mut f, &mut h, &out, &zsrc, &s, &format!("f_{t},h_{t}"), &mut shuffle, &mut noise, &mut perm)?;
        log.fh.push(l);
        steps.push(SeqStep { g, f, h, e });
    }

    Ok(SeqModel { schema: schema.clone(), kind: data.kind, g_c, steps, log })
}

impl SeqModel {
    /// Assembles a model from hand-set components.
    pub fn from_parts(schema: SeqSchema, kind: SeqKind, g_c: GeneratorNet, steps: Vec<SeqStep>) -> Result<Self> {
        schema.validate()?;
        g_c.check_role(Role::BaselineGc)?;
        if g_c.out_dim() != schema.d_c() {
            return Err(Error::Dimension("g_c must emit the baseline block".into()));
        }
        let (dc, dz, dx, dy) = (schema.d_c(), schema.d_z(), schema.d_x(), schema.d_y());
        for (t, s) in steps.iter().enumerate() {
            if s.f.x_dim() != dc + (t + 1) * dx || s.f.y_dim() != dy {
                return Err(Error::Dimension(format!("f_{t} must take (c, xbar_{t})")));
            }
            if s.h.cond_dim() != dc + (t + 1) * (dz + dx) || s.h.noise_dim() != dy {
                return Err(Error::Dimension(format!("h_{t} must take (c, zbar_{t}, xbar_{t})")));
            }
            if let Some(g) = &s.g {
                if g.cond_dim() != dc + t * (dz + dx) || g.out_dim() != dz + dx {
                    return Err(Error::Dimension(format!("g_{t} must take (c, zbar_{{t-1}}, xbar_{{t-1}})")));
                }
            }
        }
        Ok(Self { schema, kind, g_c, steps, log: SeqLog::default() })
    }

    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn kind(&self) -> SeqKind {
        self.kind
    }

    pub fn schema(&self) -> &SeqSchema {
        &self.schema
    }

    pub fn steps(&self) -> &[SeqStep] {
        &self.steps
    }

    pub fn g_c(&self) -> &GeneratorNet {
        &self.g_c
    }

    pub fn log(&self) -> &SeqLog {
        &self.log
    }

    /// Draws of the baseline covariates `C = g_c(s)`.
    pub fn sample_baseline(&self, n: usize, rng: &mut impl Rng) -> Result<Matrix> {
        let dc = self.schema.d_c();
        if n == 0 {
            return Ok(Matrix::zeros(0, dc));
        }
        let mut c = self.g_c.eval(&standard_normal(n, dc, rng))?;
        threshold_columns(&mut c, &SeqSchema::indices(&self.schema.c_binary));
        Ok(c)
    }

    /// Chained draws `C -> (Z_t, X_t) -> eta_t -> Y_t`. Survival trajectories
    /// stop at their first event; later steps keep `Y = 1` and zero covariates.
    pub fn sample_trajectory_joint(&self, n: usize, rng: &mut impl Rng) -> Result<TrajectoryBatch> {
        let (dz, dx, dy) = (self.schema.d_z(), self.schema.d_x(), self.schema.d_y());
        let c = self.sample_baseline(n, rng)?;
        let past_bin = {
            let mut v = SeqSchema::indices(&self.schema.z_binary);
            v.extend(SeqSchema::indices(&self.schema.x_binary).into_iter().map(|i| i + dz));
            v
        };
        let y_bin = SeqSchema::indices(&self.schema.y_binary);
        let (mut zs, mut xs, mut ys) = (Vec::new(), Vec::new(), Vec::new());
        let mut alive = vec![true; n];
        for (t, step) in self.steps.iter().enumerate() {
            let g = step.g.as_ref().ok_or_else(|| Error::Contract(format!("g_{t} was not fitted")))?;
            let zh: Vec<&Matrix> = zs.iter().collect();
            let xh: Vec<&Matrix> = xs.iter().collect();
            let mut cond: Vec<&Matrix> = vec![&c];
            cond.extend(&zh);
            cond.extend(&xh);
            let eps = standard_normal(n, dz + dx, rng);
            let mut past = g.eval_parts(&cond, &eps)?;
            threshold_columns(&mut past, &past_bin);
            let zt = past.slice_cols(0, dz)?;
            let xt = past.slice_cols(dz, dx)?;
            zs.push(zt);
            xs.push(xt);
            let zbar: Vec<&Matrix> = zs.iter().collect();
            let xbar: Vec<&Matrix> = xs.iter().collect();
            let mut hc: Vec<&Matrix> = vec![&c];
            hc.extend(&zbar);
            hc.extend(&xbar);
            let xi = standard_normal(n, dy, rng);
            let eta = step.h.eval_parts(&hc, &xi)?;
            let mut fc: Vec<&Matrix> = vec![&c];
            fc.extend(&xbar);
            let mut y = step.f.eval(&cat(&fc)?, &eta)?;
            round_columns(&mut y, &y_bin, rng);
            if self.kind == SeqKind::Surv {
                for i in 0..n {
                    if !alive[i] {
                        y.set(i, 0, 1.0);
                        for blk in [zs.last_mut().unwrap(), xs.last_mut().unwrap()] {
                            blk.row_mut(i).fill(0.0);
                        }
                    } else if y.get(i, 0) == 1.0 {
                        alive[i] = false;
                    }
                }
            }
            ys.push(y);
        }
        TrajectoryBatch::new(c, zs, xs, ys, self.kind)
    }

    fn check_regime(&self, xbar: &Matrix) -> Result<()> {
        if xbar.rows() != self.horizon() || xbar.cols() != self.schema.d_x() {
            return Err(Error::Dimension(format!(
                "treatment regime is {:?}, model needs {} x {}",
                xbar.shape(),
                self.horizon(),
                self.schema.d_x()
            )));
        }
        Ok(())
    }

    fn interventional_from(&self, c: &Matrix, xbar: &Matrix, rng: &mut impl Rng) -> Result<Vec<Matrix>> {
        self.check_regime(xbar)?;
        let n = c.rows();
        let dy = self.schema.d_y();
        let y_bin = SeqSchema::indices(&self.schema.y_binary);
        let mut out = Vec::with_capacity(self.horizon());
        let mut hist = c.clone();
        let mut event = vec![false; n];
        for (t, step) in self.steps.iter().enumerate() {
            hist = Matrix::hcat(&[&hist, &repeat_point(xbar.row(t), n)])?;
            let eta = standard_normal(n, dy, rng);
            let mut y = step.f.eval(&hist, &eta)?;
            round_columns(&mut y, &y_bin, rng);
            if self.kind == SeqKind::Surv {
                for i in 0..n {
                    if event[i] {
                        y.set(i, 0, 1.0);
                    } else if y.get(i, 0) == 1.0 {
                        event[i] = true;
                    }
                }
            }
            out.push(y);
        }
        Ok(out)
    }

    /// Outcome draws per step under the regime `xbar` (one row per step) at
    /// baseline `c`. Survival outcomes are absorbing.
    pub fn sample_trajectory_interventional(
        &self,
        xbar: &Matrix,
        c: &[f64],
        n: usize,
        rng: &mut impl Rng,
    ) -> Result<Vec<Matrix>> {
        if c.len() != self.schema.d_c() {
            return Err(Error::Dimension(format!("baseline has {} entries, expected {}", c.len(), self.schema.d_c())));
        }
        self.interventional_from(&repeat_point(c, n), xbar, rng)
    }

    /// As [`sample_trajectory_interventional`](Self::sample_trajectory_interventional)
    /// with the baseline drawn from `g_c`, i.e. marginal over `C`.
    pub fn sample_trajectory_interventional_marginal(
        &self,
        xbar: &Matrix,
        n: usize,
        rng: &mut impl Rng,
    ) -> Result<Vec<Matrix>> {
        self.check_regime(xbar)?;
        let c = self.sample_baseline(n, rng)?;
        self.interventional_from(&c, xbar, rng)
    }
}

/// Product-limit survival estimate `S(0..=horizon)`. `Some(t)` is an event at
/// time `t` in `1..=horizon`; `None` is censoring at the horizon.
pub fn kaplan_meier(events: &[Option<usize>], horizon: usize) -> Result<Vec<f64>> {
    if events.is_empty() {
        return Err(Error::Input("Kaplan-Meier needs at least one unit".into()));
    }
    let mut deaths = vec![0usize; horizon + 1];
    for e in events.iter().flatten() {
        if *e == 0 || *e > horizon {
            return Err(Error::Input(format!("event time {e} outside 1..={horizon}")));
        }
        deaths[*e] += 1;
    }
    let mut s = vec![1.0; horizon + 1];
    let mut at_risk = events.len();
    for t in 1..=horizon {
        s[t] = s[t - 1];
        if at_risk > 0 {
            s[t] *= 1.0 - deaths[t] as f64 / at_risk as f64;
        }
        at_risk -= deaths[t];
    }
    Ok(s)
}

/// Largest absolute gap between two curves of equal length.
pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn km_hand_cases() {
        assert_eq!(kaplan_meier(&[None, None], 3).unwrap(), vec![1.0; 4]);
        let s = kaplan_meier(&[Some(1), Some(2), None, None], 3).unwrap();
        assert_eq!(s, vec![1.0, 0.75, 0.5, 0.5]);
        let s = kaplan_meier(&[Some(1), Some(1)], 2).unwrap();
        assert_eq!(s[1], 0.0);
        assert!(kaplan_meier(&[], 2).is_err());
        assert!(kaplan_meier(&[Some(0)], 2).is_err());
    }

    #[test]
    fn survival_masks_follow_indicators() {
        let c = Matrix::column(&[0.0, 1.0, 0.0]);
        let zx = || vec![Matrix::zeros(3, 1); 3];
        let y =
            vec![Matrix::column(&[0.0, 1.0, 0.0]), Matrix::column(&[0.0, 1.0, 1.0]), Matrix::column(&[0.0, 1.0, 1.0])];
        let b = TrajectoryBatch::new(c.clone(), zx(), zx(), y, SeqKind::Surv).unwrap();
        assert_eq!(b.at_risk_counts(), vec![3, 2, 1]);
        assert_eq!(b.event_times(), vec![None, Some(1), Some(2)]);
        let bad =
            vec![Matrix::column(&[1.0, 0.0, 0.0]), Matrix::column(&[0.0, 0.0, 0.0]), Matrix::column(&[0.0, 0.0, 0.0])];
        assert!(TrajectoryBatch::new(c, zx(), zx(), bad, SeqKind::Surv).is_err());
    }

    #[test]
    fn strata_use_values_or_quantile_bins() {
        let c = Matrix::column(&[1.0, 0.0, 1.0]);
        assert_eq!(baseline_strata(&c), vec![1, 0, 1]);
        let c = Matrix::column(&(0..16).rev().map(f64::from).collect::<Vec<_>>());
        let l = baseline_strata(&c);
        assert_eq!(l[15], 0);
        assert_eq!(l[0], 7);
    }
}
