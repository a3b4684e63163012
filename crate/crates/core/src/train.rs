//! Minibatch training loops shared by the static and sequential models.

use ndiff::{Adam, AdamConfig, Matrix, Tape};
use rand::Rng;

use crate::losses::{
    conditional_energy_loss, loss_y_given_zx, monotonicity_penalty, zprime_draws, OutcomeBatch, ZPrimeSource,
};
use crate::nets::{GeneratorNet, Margin};
use crate::rng::permutation;
use crate::{Error, Result};

/// Optimisation settings common to every component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSettings {
    pub epochs: usize,
    pub lr: f64,
    pub m: usize,
    pub batch_size: usize,
    pub monotone_penalty: f64,
    /// Final learning rate as a fraction of `lr`; values below 1 anneal on a cosine schedule.
    pub lr_final_ratio: f64,
}

impl TrainSettings {
    pub(crate) fn lr_at(&self, epoch: usize) -> f64 {
        if self.lr_final_ratio >= 1.0 || self.epochs < 2 {
            return self.lr;
        }
        let frac = epoch as f64 / (self.epochs - 1) as f64;
        let floor = self.lr * self.lr_final_ratio;
        floor + 0.5 * (self.lr - floor) * (1.0 + (std::f64::consts::PI * frac).cos())
    }
}

pub(crate) const PROBE_LO: f64 = -5.0;
pub(crate) const PROBE_HI: f64 = 5.0;
pub(crate) const PROBE_POINTS: usize = 101;

pub(crate) fn minibatches(n: usize, size: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    permutation(n, rng).chunks(size.max(1)).map(<[usize]>::to_vec).collect()
}

fn adam(s: &TrainSettings) -> Adam {
    Adam::new(AdamConfig { lr: s.lr, ..AdamConfig::default() })
}

fn check_epoch(component: &str, epoch: usize, loss: f64) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged { component: component.to_string(), epoch })
    }
}

fn pick(m: Option<&Matrix>, idx: &[usize]) -> Result<Option<Matrix>> {
    Ok(match m {
        Some(m) => Some(m.select_rows(idx)?),
        None => None,
    })
}

/// Fits `net([cond, noise]) ~ target` by minimising the energy loss.
/// Returns the mean minibatch loss of every epoch.
pub(crate) fn fit_engression(
    net: &mut GeneratorNet,
    cond: Option<&Matrix>,
    target: &Matrix,
    s: &TrainSettings,
    component: &str,
    shuffle: &mut impl Rng,
    noise: &mut impl Rng,
) -> Result<Vec<f64>> {
    let mut opt = adam(s);
    let mut log = Vec::with_capacity(s.epochs);
    for epoch in 0..s.epochs {
        opt.set_lr(s.lr_at(epoch));
        let mut total = 0.0;
        let batches = minibatches(target.rows(), s.batch_size, shuffle);
        for idx in &batches {
            let t = target.select_rows(idx)?;
            let c = pick(cond, idx)?;
            let mut tape = Tape::new();
            let bound = net.bind(&mut tape);
            let loss = conditional_energy_loss(&mut tape, net, &bound, c.as_ref(), &t, s.m, noise)?;
            total += tape.scalar(loss);
            let grads = tape.backward(loss)?;
            let g = net.collect_grads(&bound, &grads);
            opt.update(&mut net.params_mut(), &g)?;
        }
        let mean = total / batches.len() as f64;
        check_epoch(component, epoch, mean)?;
        log.push(mean);
        if epoch % 100 == 0 {
            log::debug!("{component} epoch {epoch}: loss {mean:.5}");
        }
    }
    Ok(log)
}

/// Replacement covariates for the marginal-normality term.
pub(crate) enum ZPrimeKind<'a> {
    Permutation,
    Stratified(&'a [usize]),
    Aux { e: &'a GeneratorNet, cond: &'a Matrix },
}

/// Full-data view of the outcome problem.
pub(crate) struct OutcomeData<'a> {
    pub base: Option<&'a Matrix>,
    pub z: &'a Matrix,
    pub x: &'a Matrix,
    pub y: &'a Matrix,
}

/// Jointly fits the margin `f` and the dependency model `h`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn fit_outcome(
    f: &mut Margin,
    h: &mut GeneratorNet,
    data: &OutcomeData<'_>,
    zsrc: &ZPrimeKind<'_>,
    s: &TrainSettings,
    component: &str,
    shuffle: &mut impl Rng,
    noise: &mut impl Rng,
    perm: &mut impl Rng,
) -> Result<Vec<f64>> {
    let mut opt = adam(s);
    let cfg = crate::losses::EnergyLossConfig { m: s.m, batch_size: s.batch_size };
    let mut log = Vec::with_capacity(s.epochs);
    for epoch in 0..s.epochs {
        opt.set_lr(s.lr_at(epoch));
        let mut total = 0.0;
        let batches = minibatches(data.y.rows(), s.batch_size, shuffle);
        for idx in &batches {
            let base = pick(data.base, idx)?;
            let z = data.z.select_rows(idx)?;
            let x = data.x.select_rows(idx)?;
            let y = data.y.select_rows(idx)?;
            let zp = match zsrc {
                ZPrimeKind::Permutation => zprime_draws(&ZPrimeSource::Permutation, &z, s.m, perm)?,
                ZPrimeKind::Stratified(labels) => {
                    let l: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
                    zprime_draws(&ZPrimeSource::Stratified(&l), &z, s.m, perm)?
                }
                ZPrimeKind::Aux { e, cond } => {
                    let c = cond.select_rows(idx)?;
                    zprime_draws(&ZPrimeSource::Aux { e, x0: &c }, &z, s.m, perm)?
                }
            };
            let mut tape = Tape::new();
            let fb = f.bind(&mut tape)?;
            let hb = h.bind(&mut tape);
            let batch = OutcomeBatch { base: base.as_ref(), z: &z, x: &x, y: &y };
            let mut loss = loss_y_given_zx(&mut tape, &fb, h, &hb, batch, &ZPrimeSource::Given(zp), &cfg, noise)?;
            total += tape.scalar(loss);
            if s.monotone_penalty > 0.0 {
                if let Some(p) =
                    monotonicity_penalty(&mut tape, &fb, s.monotone_penalty, PROBE_LO, PROBE_HI, PROBE_POINTS)?
                {
                    loss = tape.add(loss, p)?;
                }
            }
            let grads = tape.backward(loss)?;
            let mut g = fb.collect_grads(f, &grads);
            g.extend(h.collect_grads(&hb, &grads));
            let mut params: Vec<&mut Matrix> = f.nets_mut().into_iter().flat_map(|n| n.params_mut()).collect();
            params.extend(h.params_mut());
            opt.update(&mut params, &g)?;
        }
        let mean = total / batches.len() as f64;
        check_epoch(component, epoch, mean)?;
        log.push(mean);
        if epoch % 100 == 0 {
            log::debug!("{component} epoch {epoch}: loss {mean:.5}");
        }
    }
    Ok(log)
}
