//! Energy score, energy distance and the finite-sample training objectives.
//!
//! Generated draws are stacked block-wise: with `n` observations and `m`
//! draws each, row `j * n + i` holds draw `j` for observation `i`.

use ndiff::{Matrix, Tape, Var};
use rand::Rng;

use crate::nets::{BoundMargin, BoundNet, GeneratorNet};
use crate::rng::{permutation, standard_normal};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnergyLossConfig {
    /// Noise draws per observation.
    pub m: usize,
    pub batch_size: usize,
}

impl Default for EnergyLossConfig {
    fn default() -> Self {
        Self { m: 2, batch_size: 256 }
    }
}

impl EnergyLossConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::DegenerateSample { needed: 2, got: self.m });
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        Ok(())
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Mean distance over distinct ordered pairs of rows.
fn within_mean(p: &Matrix) -> f64 {
    let n = p.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += dist(p.row(i), p.row(j));
        }
    }
    2.0 * s / (n * (n - 1)) as f64
}

/// Unbiased energy score of `samples` against observation `u` (higher is better).
pub fn energy_score(samples: &Matrix, u: &[f64]) -> Result<f64> {
    let m = samples.rows();
    if m < 2 {
        return Err(Error::DegenerateSample { needed: 2, got: m });
    }
    if samples.cols() != u.len() {
        return Err(Error::Dimension(format!("samples have {} columns, observation has {}", samples.cols(), u.len())));
    }
    let to_obs = samples.iter_rows().map(|s| dist(s, u)).sum::<f64>() / m as f64;
    Ok(0.5 * within_mean(samples) - to_obs)
}

/// Unbiased energy distance between two samples. Can be slightly negative.
pub fn energy_distance(p: &Matrix, q: &Matrix) -> Result<f64> {
    for s in [p, q] {
        if s.rows() < 2 {
            return Err(Error::DegenerateSample { needed: 2, got: s.rows() });
        }
    }
    if p.cols() != q.cols() {
        return Err(Error::Dimension(format!("{} vs {} columns", p.cols(), q.cols())));
    }
    let mut cross = 0.0;
    for a in p.iter_rows() {
        for b in q.iter_rows() {
            cross += dist(a, b);
        }
    }
    cross /= (p.rows() * q.rows()) as f64;
    Ok(2.0 * cross - within_mean(p) - within_mean(q))
}

/// Stacks `m` copies of `a` vertically.
pub fn repeat_rows(a: &Matrix, m: usize) -> Matrix {
    let mut data = Vec::with_capacity(a.len() * m);
    for _ in 0..m {
        data.extend_from_slice(a.data());
    }
    Matrix::new(a.rows() * m, a.cols(), data).expect("shape preserved")
}

/// Mean over observations of the negated empirical energy score:
/// `(1/m) sum_j |y_i - s_ij| - 1/(2m(m-1)) sum_{j != k} |s_ij - s_ik|`.
pub fn energy_term(tape: &mut Tape, draws: Var, target: &Matrix, m: usize) -> Result<Var> {
    let n = target.rows();
    if m < 2 {
        return Err(Error::DegenerateSample { needed: 2, got: m });
    }
    if tape.shape(draws) != (n * m, target.cols()) {
        return Err(Error::Dimension(format!(
            "draws {:?} do not stack {m} copies of target {:?}",
            tape.shape(draws),
            target.shape()
        )));
    }
    let rep = tape.constant(repeat_rows(target, m));
    let diff = tape.sub(draws, rep)?;
    let norms = tape.row_norms(diff);
    let fit = tape.sum(norms);
    let fit = tape.scale(fit, 1.0 / (n * m) as f64);

    let blocks: Vec<Var> = (0..m).map(|j| tape.slice_rows(draws, j * n, n)).collect::<ndiff::Result<_>>()?;
    let mut spread: Option<Var> = None;
    for j in 0..m {
        for k in (j + 1)..m {
            let d = tape.sub(blocks[j], blocks[k])?;
            let nr = tape.row_norms(d);
            let s = tape.sum(nr);
            spread = Some(match spread {
                None => s,
                Some(acc) => tape.add(acc, s)?,
            });
        }
    }
    // Each unordered pair appears twice in the j != k sum.
    let spread = tape.scale(spread.expect("m >= 2"), 1.0 / (n * m * (m - 1)) as f64);
    Ok(tape.sub(fit, spread)?)
}

/// Energy loss of a (conditional) generator `net([cond, noise])` against `target`.
pub fn conditional_energy_loss(
    tape: &mut Tape,
    net: &GeneratorNet,
    bound: &BoundNet,
    cond: Option<&Matrix>,
    target: &Matrix,
    m: usize,
    rng: &mut impl Rng,
) -> Result<Var> {
    let n = target.rows();
    let noise = standard_normal(n * m, net.noise_dim(), rng);
    let input = match cond {
        Some(c) => {
            if c.rows() != n {
                return Err(Error::Dimension(format!("{} conditioning rows for {n} targets", c.rows())));
            }
            Matrix::hcat(&[&repeat_rows(c, m), &noise])?
        }
        None => noise,
    };
    let iv = tape.constant(input);
    let out = bound.forward(tape, iv)?;
    energy_term(tape, out, target, m)
}

/// Empirical loss of the past generator `g` on rows of `(Z, X)`.
pub fn loss_zx(
    tape: &mut Tape,
    g: &GeneratorNet,
    bound: &BoundNet,
    batch: &Matrix,
    cfg: &EnergyLossConfig,
    rng: &mut impl Rng,
) -> Result<Var> {
    g.check_role(crate::nets::Role::PastG)?;
    conditional_energy_loss(tape, g, bound, None, batch, cfg.m, rng)
}

/// Empirical loss of the auxiliary model `e(x0, zeta)` for `Z | X0`.
pub fn loss_aux(
    tape: &mut Tape,
    e: &GeneratorNet,
    bound: &BoundNet,
    x0: &Matrix,
    z: &Matrix,
    cfg: &EnergyLossConfig,
    rng: &mut impl Rng,
) -> Result<Var> {
    e.check_role(crate::nets::Role::AuxE)?;
    conditional_energy_loss(tape, e, bound, Some(x0), z, cfg.m, rng)
}

/// Where the replacement covariates `Z'` of the marginal-normality term come from.
pub enum ZPrimeSource<'a> {
    /// Rows of the batch's own `Z`, reassigned by a random permutation.
    Permutation,
    /// Permutation restricted to rows sharing a stratum label.
    Stratified(&'a [usize]),
    /// Draws `e(x0_i, zeta)` from a fitted auxiliary model.
    Aux { e: &'a GeneratorNet, x0: &'a Matrix },
    /// Precomputed stacked draws, `m * n` rows.
    Given(Matrix),
}

/// Rotations of one random permutation: draw `k` of row `i` is the row `k`
/// places after `i` in a shuffled order, so the `m` draws are distinct rows
/// other than `i` whenever the group has more than `m` members.
fn rotated_indices(group: &[usize], m: usize, out: &mut [Vec<usize>], rng: &mut impl Rng) {
    let len = group.len();
    let order = permutation(len, rng);
    for (p, &slot) in order.iter().enumerate() {
        let i = group[slot];
        for (k, draw) in out.iter_mut().enumerate().take(m) {
            let q = (p + k + 1) % len;
            draw[i] = group[order[q]];
        }
    }
}

/// Stacked `m * n` rows of `Z'` for the given source.
pub fn zprime_draws(source: &ZPrimeSource<'_>, z: &Matrix, m: usize, rng: &mut impl Rng) -> Result<Matrix> {
    let n = z.rows();
    let mut idx = vec![vec![0usize; n]; m];
    match source {
        ZPrimeSource::Permutation => {
            let all: Vec<usize> = (0..n).collect();
            rotated_indices(&all, m, &mut idx, rng);
        }
        ZPrimeSource::Stratified(labels) => {
            if labels.len() != n {
                return Err(Error::Dimension(format!("{} stratum labels for {n} rows", labels.len())));
            }
            let k = labels.iter().copied().max().map_or(0, |v| v + 1);
            let mut groups = vec![Vec::new(); k];
            for (i, &l) in labels.iter().enumerate() {
                groups[l].push(i);
            }
            for g in groups.iter().filter(|g| !g.is_empty()) {
                rotated_indices(g, m, &mut idx, rng);
            }
        }
        ZPrimeSource::Aux { e, x0 } => {
            if x0.rows() != n {
                return Err(Error::Dimension(format!("{} x0 rows for {n} rows", x0.rows())));
            }
            let zeta = standard_normal(n * m, e.noise_dim(), rng);
            let out = e.eval_parts(&[&repeat_rows(x0, m)], &zeta)?;
            if out.cols() != z.cols() {
                return Err(Error::Dimension(format!("aux model emits {} columns, Z has {}", out.cols(), z.cols())));
            }
            return Ok(out);
        }
        ZPrimeSource::Given(mat) => {
            if mat.shape() != (n * m, z.cols()) {
                return Err(Error::Dimension(format!("given Z' is {:?}, need {:?}", mat.shape(), (n * m, z.cols()))));
            }
            return Ok(mat.clone());
        }
    }
    let flat: Vec<usize> = idx.into_iter().flatten().collect();
    Ok(z.select_rows(&flat)?)
}

/// One batch for the outcome objective. `base` (e.g. baseline covariates) is
/// fed to both `f` and `h` and is never replaced by `Z'`.
#[derive(Debug, Clone, Copy)]
pub struct OutcomeBatch<'a> {
    pub base: Option<&'a Matrix>,
    pub z: &'a Matrix,
    pub x: &'a Matrix,
    pub y: &'a Matrix,
}

/// Joint empirical loss for `(f, h)`: a conditional-fit energy term for
/// `f(x, h(z, x, xi))` against `y`, plus a term pulling `h(z', x, xi)`
/// towards `N(0, I)`.
pub fn loss_y_given_zx(
    tape: &mut Tape,
    f: &BoundMargin,
    h: &GeneratorNet,
    hb: &BoundNet,
    batch: OutcomeBatch<'_>,
    zprime: &ZPrimeSource<'_>,
    cfg: &EnergyLossConfig,
    rng: &mut impl Rng,
) -> Result<Var> {
    let OutcomeBatch { base, z, x, y } = batch;
    let (n, m, dy) = (y.rows(), cfg.m, y.cols());
    for (name, blk) in [("z", z), ("x", x)] {
        if blk.rows() != n {
            return Err(Error::Dimension(format!("{name} has {} rows, y has {n}", blk.rows())));
        }
    }
    if h.noise_dim() != dy {
        return Err(Error::Dimension(format!("h noise width {} != outcome width {dy}", h.noise_dim())));
    }
    let x_rep = repeat_rows(x, m);
    let base_rep = base.map(|b| repeat_rows(b, m));
    let f_cond = match &base_rep {
        Some(b) => Matrix::hcat(&[b, &x_rep])?,
        None => x_rep.clone(),
    };

    // Conditional fit.
    let xi = standard_normal(n * m, dy, rng);
    let z_rep = repeat_rows(z, m);
    let mut parts: Vec<&Matrix> = Vec::new();
    if let Some(b) = &base_rep {
        parts.push(b);
    }
    parts.extend([&z_rep, &x_rep, &xi]);
    let h_in = tape.constant(Matrix::hcat(&parts)?);
    let eta_tilde = hb.forward(tape, h_in)?;
    let fx = tape.constant(f_cond);
    let y_hat = f.forward(tape, fx, eta_tilde)?;
    let fit = energy_term(tape, y_hat, y, m)?;

    // Marginal normality of h under Z'.
    let zp = zprime_draws(zprime, z, m, rng)?;
    let xi2 = standard_normal(n * m, dy, rng);
    let mut parts: Vec<&Matrix> = Vec::new();
    if let Some(b) = &base_rep {
        parts.push(b);
    }
    parts.extend([&zp, &x_rep, &xi2]);
    let h_in = tape.constant(Matrix::hcat(&parts)?);
    let eta_bar = hb.forward(tape, h_in)?;
    let eta = standard_normal(n, dy, rng);
    let normal = energy_term(tape, eta_bar, &eta, m)?;
    Ok(tape.add(fit, normal)?)
}

/// Hinge penalty `lambda * sum max(0, -slope)` on finite differences of both
/// pre-ANM components over an even probe grid. `None` for other margins.
pub fn monotonicity_penalty(
    tape: &mut Tape,
    f: &BoundMargin,
    lambda: f64,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<Option<Var>> {
    let BoundMargin::PreAnm { outer, noise_net } = f else {
        return Ok(None);
    };
    if points < 2 || hi <= lo {
        return Err(Error::Config("probe grid needs two points and hi > lo".into()));
    }
    let step = (hi - lo) / (points - 1) as f64;
    let grid = tape.constant(crate::nets::probe_grid(lo, hi, points));
    let mut total: Option<Var> = None;
    for net in [outer, noise_net] {
        let o = net.forward(tape, grid)?;
        let up = tape.slice_rows(o, 1, points - 1)?;
        let down = tape.slice_rows(o, 0, points - 1)?;
        let d = tape.sub(down, up)?;
        let viol = tape.relu(d);
        let s = tape.sum(viol);
        total = Some(match total {
            None => s,
            Some(t) => tape.add(t, s)?,
        });
    }
    Ok(total.map(|t| tape.scale(t, lambda / step)))
}
