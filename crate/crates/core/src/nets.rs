//! Generator networks. Every component of a frengression model is an MLP that
//! maps `[conditioning, noise]` (concatenated at the input) to an output
//! block; only the role tag and the dimensions differ.

use std::io::{Read, Write};

use ndiff::{Gradients, Matrix, Tape, Var};
use rand::Rng;

use crate::margin::ClosedFormMargin;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    PastG,
    MarginF,
    CopulaH,
    AuxE,
    BaselineGc,
}

impl Role {
    fn tag(self) -> u8 {
        match self {
            Role::PastG => 0,
            Role::MarginF => 1,
            Role::CopulaH => 2,
            Role::AuxE => 3,
            Role::BaselineGc => 4,
        }
    }

    fn from_tag(t: u8) -> Result<Self> {
        Ok(match t {
            0 => Role::PastG,
            1 => Role::MarginF,
            2 => Role::CopulaH,
            3 => Role::AuxE,
            4 => Role::BaselineGc,
            _ => return Err(Error::Format(format!("unknown role tag {t}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub hidden_layers: usize,
    pub hidden_width: usize,
}

impl MlpSpec {
    pub fn new(in_dim: usize, out_dim: usize) -> Self {
        Self { in_dim, out_dim, hidden_layers: 3, hidden_width: 100 }
    }

    pub fn with_hidden(mut self, layers: usize, width: usize) -> Self {
        self.hidden_layers = layers;
        self.hidden_width = width;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_dim == 0 || self.out_dim == 0 || self.hidden_layers == 0 || self.hidden_width == 0 {
            return Err(Error::Config(format!("degenerate network shape {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `in x out`.
    pub w: Matrix,
    /// `1 x out`.
    pub b: Matrix,
}

/// An MLP with ReLU hidden layers and a linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorNet {
    role: Role,
    cond_dim: usize,
    noise_dim: usize,
    layers: Vec<Layer>,
}

/// Parameter handles of one net registered on a tape.
#[derive(Debug, Clone)]
pub struct BoundNet {
    vars: Vec<(Var, Var)>,
}

impl GeneratorNet {
    /// Fresh net with uniform `±sqrt(6 / (fan_in + fan_out))` weights and zero biases.
    pub fn new(role: Role, cond_dim: usize, noise_dim: usize, spec: MlpSpec, rng: &mut impl Rng) -> Result<Self> {
        spec.validate()?;
        if spec.in_dim != cond_dim + noise_dim {
            return Err(Error::Dimension(format!(
                "input width {} != conditioning {} + noise {}",
                spec.in_dim, cond_dim, noise_dim
            )));
        }
        let mut widths = vec![spec.in_dim];
        widths.extend(std::iter::repeat_n(spec.hidden_width, spec.hidden_layers));
        widths.push(spec.out_dim);
        let layers = widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Layer {
                    w: Matrix::from_fn(fan_in, fan_out, |_, _| rng.random_range(-a..a)),
                    b: Matrix::zeros(1, fan_out),
                }
            })
            .collect();
        Ok(Self { role, cond_dim, noise_dim, layers })
    }

    /// Builds a net from explicit `(weight, bias)` pairs. A single pair is a
    /// purely linear map.
    pub fn from_layers(role: Role, cond_dim: usize, noise_dim: usize, layers: Vec<(Matrix, Matrix)>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("a net needs at least one layer".into()));
        }
        let mut expect = cond_dim + noise_dim;
        for (i, (w, b)) in layers.iter().enumerate() {
            if w.rows() != expect || b.shape() != (1, w.cols()) || w.cols() == 0 {
                return Err(Error::Dimension(format!(
                    "layer {i}: weight {:?}, bias {:?}, expected {expect} inputs",
                    w.shape(),
                    b.shape()
                )));
            }
            expect = w.cols();
        }
        Ok(Self { role, cond_dim, noise_dim, layers: layers.into_iter().map(|(w, b)| Layer { w, b }).collect() })
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn cond_dim(&self) -> usize {
        self.cond_dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn in_dim(&self) -> usize {
        self.cond_dim + self.noise_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.w.cols())
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn spec(&self) -> MlpSpec {
        let hidden = self.layers.len() - 1;
        MlpSpec {
            in_dim: self.in_dim(),
            out_dim: self.out_dim(),
            hidden_layers: hidden,
            hidden_width: if hidden > 0 { self.layers[0].w.cols() } else { 0 },
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        self.layers.iter_mut().flat_map(|l| [&mut l.w, &mut l.b]).collect()
    }

    pub fn check_role(&self, role: Role) -> Result<()> {
        if self.role == role {
            Ok(())
        } else {
            Err(Error::Contract(format!("expected a {role:?} net, got {:?}", self.role)))
        }
    }

    /// Evaluates on an already concatenated input, without recording gradients.
    pub fn eval(&self, input: &Matrix) -> Result<Matrix> {
        if input.cols() != self.in_dim() {
            return Err(Error::Dimension(format!(
                "{:?} net takes {} inputs, got {}",
                self.role,
                self.in_dim(),
                input.cols()
            )));
        }
        let last = self.layers.len() - 1;
        let mut h = input.clone();
        for (i, l) in self.layers.iter().enumerate() {
            h = h.matmul(&l.w)?.add_row(&l.b)?;
            if i < last {
                h = h.map(|v| v.max(0.0));
            }
        }
        Ok(h)
    }

    /// Concatenates conditioning blocks with the noise block, then evaluates.
    pub fn eval_parts(&self, cond: &[&Matrix], noise: &Matrix) -> Result<Matrix> {
        let mut parts: Vec<&Matrix> = cond.to_vec();
        parts.push(noise);
        let input = concat(&parts)?;
        self.eval(&input)
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundNet {
        let vars = self.layers.iter().map(|l| (tape.param(l.w.clone()), tape.param(l.b.clone()))).collect();
        BoundNet { vars }
    }

    /// Gradients for this net's parameters, in [`params_mut`](Self::params_mut) order.
    pub fn collect_grads(&self, bound: &BoundNet, grads: &Gradients) -> Vec<Matrix> {
        self.layers
            .iter()
            .zip(&bound.vars)
            .flat_map(|(l, &(w, b))| [grads.get_or_zeros(w, l.w.shape()), grads.get_or_zeros(b, l.b.shape())])
            .collect()
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(NET_MAGIC)?;
        w.write_all(&[self.role.tag()])?;
        write_u32(w, self.cond_dim)?;
        write_u32(w, self.noise_dim)?;
        write_u32(w, self.layers.len())?;
        for l in &self.layers {
            write_u32(w, l.w.rows())?;
            write_u32(w, l.w.cols())?;
            write_f64s(w, l.w.data())?;
            write_f64s(w, l.b.data())?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != NET_MAGIC {
            return Err(Error::Format("not a generator net".into()));
        }
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)?;
        let role = Role::from_tag(tag[0])?;
        let cond_dim = read_u32(r)?;
        let noise_dim = read_u32(r)?;
        let n_layers = read_u32(r)?;
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let rows = read_u32(r)?;
            let cols = read_u32(r)?;
            let w = Matrix::new(rows, cols, read_f64s(r, rows * cols)?)?;
            let b = Matrix::new(1, cols, read_f64s(r, cols)?)?;
            layers.push((w, b));
        }
        Self::from_layers(role, cond_dim, noise_dim, layers)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }
}

impl BoundNet {
    /// Records a forward pass; `input` must already be `[cond, noise]`.
    pub fn forward(&self, tape: &mut Tape, input: Var) -> Result<Var> {
        let last = self.vars.len() - 1;
        let mut h = input;
        for (i, &(w, b)) in self.vars.iter().enumerate() {
            let z = tape.matmul(h, w)?;
            h = tape.add_row(z, b)?;
            if i < last {
                h = tape.relu(h);
            }
        }
        Ok(h)
    }
}

/// Column-wise concatenation that tolerates a single block.
pub fn concat(parts: &[&Matrix]) -> Result<Matrix> {
    match parts {
        [] => Err(Error::Input("nothing to concatenate".into())),
        [one] => Ok((*one).clone()),
        _ => Ok(Matrix::hcat(parts)?),
    }
}

fn check_rows(what: &str, a: &Matrix, b: &Matrix) -> Result<()> {
    if a.rows() != b.rows() {
        return Err(Error::Dimension(format!("{what}: {} rows vs {} rows", a.rows(), b.rows())));
    }
    Ok(())
}

/// `(Z, X) = g(eps)`; binary columns come back as raw continuous values.
pub fn forward_g(net: &GeneratorNet, noise: &Matrix) -> Result<Matrix> {
    net.check_role(Role::PastG)?;
    net.eval(noise)
}

/// `eta_tilde = h(z, x, xi)`.
pub fn forward_h(net: &GeneratorNet, z: &Matrix, x: &Matrix, xi: &Matrix) -> Result<Matrix> {
    net.check_role(Role::CopulaH)?;
    check_rows("forward_h", z, x)?;
    check_rows("forward_h", z, xi)?;
    net.eval_parts(&[z, x], xi)
}

/// Draws approximating `Z | X0 = x0`.
pub fn forward_e(net: &GeneratorNet, x0: &Matrix, zeta: &Matrix) -> Result<Matrix> {
    net.check_role(Role::AuxE)?;
    check_rows("forward_e", x0, zeta)?;
    net.eval_parts(&[x0], zeta)
}

/// `f(x, eta)` for any margin representation.
pub fn forward_f(margin: &Margin, x: &Matrix, eta: &Matrix) -> Result<Matrix> {
    margin.eval(x, eta)
}

/// Monotone pre-additive-noise margin `f(x + f1(eta))` for scalar treatment and outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct PreAnmMargin {
    pub outer: GeneratorNet,
    pub noise_net: GeneratorNet,
}

impl PreAnmMargin {
    pub fn new(hidden_layers: usize, width: usize, rng: &mut impl Rng) -> Result<Self> {
        let spec = MlpSpec::new(1, 1).with_hidden(hidden_layers, width);
        Ok(Self {
            outer: GeneratorNet::new(Role::MarginF, 1, 0, spec, rng)?,
            noise_net: GeneratorNet::new(Role::MarginF, 0, 1, spec, rng)?,
        })
    }

    pub fn from_nets(outer: GeneratorNet, noise_net: GeneratorNet) -> Result<Self> {
        for n in [&outer, &noise_net] {
            if n.in_dim() != 1 || n.out_dim() != 1 {
                return Err(Error::Dimension("pre-ANM nets must be scalar to scalar".into()));
            }
        }
        Ok(Self { outer, noise_net })
    }

    pub fn eval(&self, x: &Matrix, eta: &Matrix) -> Result<Matrix> {
        if x.cols() != 1 || eta.cols() != 1 {
            return Err(Error::Dimension("pre-ANM margin needs scalar x and eta".into()));
        }
        check_rows("pre-ANM", x, eta)?;
        let shift = self.noise_net.eval(eta)?;
        self.outer.eval(&x.add(&shift)?)
    }

    /// Smallest finite-difference slope of `f` and `f1` on an even grid over `[lo, hi]`.
    pub fn min_slopes(&self, lo: f64, hi: f64, points: usize) -> Result<(f64, f64)> {
        let grid = probe_grid(lo, hi, points);
        let step = (hi - lo) / (points - 1) as f64;
        let slope = |net: &GeneratorNet| -> Result<f64> {
            let o = net.eval(&grid)?;
            Ok(o.data().windows(2).map(|w| (w[1] - w[0]) / step).fold(f64::INFINITY, f64::min))
        };
        Ok((slope(&self.outer)?, slope(&self.noise_net)?))
    }
}

pub fn probe_grid(lo: f64, hi: f64, points: usize) -> Matrix {
    let step = (hi - lo) / (points.max(2) - 1) as f64;
    Matrix::from_fn(points, 1, |r, _| lo + step * r as f64)
}

/// The causal-margin component `f`.
#[derive(Debug, Clone, PartialEq)]
pub enum Margin {
    Net(GeneratorNet),
    PreAnm(PreAnmMargin),
    ClosedForm(ClosedFormMargin),
}

/// A trainable margin registered on a tape.
#[derive(Debug, Clone)]
pub enum BoundMargin {
    Net(BoundNet),
    PreAnm { outer: BoundNet, noise_net: BoundNet },
}

impl Margin {
    pub fn x_dim(&self) -> usize {
        match self {
            Margin::Net(n) => n.cond_dim(),
            Margin::PreAnm(_) => 1,
            Margin::ClosedForm(c) => c.x_dim(),
        }
    }

    pub fn y_dim(&self) -> usize {
        match self {
            Margin::Net(n) => n.out_dim(),
            Margin::PreAnm(_) | Margin::ClosedForm(_) => 1,
        }
    }

    pub fn noise_dim(&self) -> usize {
        match self {
            Margin::Net(n) => n.noise_dim(),
            Margin::PreAnm(_) | Margin::ClosedForm(_) => 1,
        }
    }

    pub fn eval(&self, x: &Matrix, eta: &Matrix) -> Result<Matrix> {
        check_rows("forward_f", x, eta)?;
        if x.cols() != self.x_dim() || eta.cols() != self.noise_dim() {
            return Err(Error::Dimension(format!(
                "margin takes x:{} eta:{}, got x:{} eta:{}",
                self.x_dim(),
                self.noise_dim(),
                x.cols(),
                eta.cols()
            )));
        }
        match self {
            Margin::Net(n) => {
                n.check_role(Role::MarginF)?;
                n.eval_parts(&[x], eta)
            }
            Margin::PreAnm(p) => p.eval(x, eta),
            Margin::ClosedForm(c) => Ok(Matrix::from_fn(x.rows(), 1, |r, _| c.generate(x.row(r), eta.get(r, 0)))),
        }
    }

    pub fn is_trainable(&self) -> bool {
        !matches!(self, Margin::ClosedForm(_))
    }

    pub fn bind(&self, tape: &mut Tape) -> Result<BoundMargin> {
        match self {
            Margin::Net(n) => Ok(BoundMargin::Net(n.bind(tape))),
            Margin::PreAnm(p) => {
                Ok(BoundMargin::PreAnm { outer: p.outer.bind(tape), noise_net: p.noise_net.bind(tape) })
            }
            Margin::ClosedForm(_) => Err(Error::Contract("a closed-form margin has no parameters to fit".into())),
        }
    }

    pub fn nets(&self) -> Vec<&GeneratorNet> {
        match self {
            Margin::Net(n) => vec![n],
            Margin::PreAnm(p) => vec![&p.outer, &p.noise_net],
            Margin::ClosedForm(_) => Vec::new(),
        }
    }

    pub fn nets_mut(&mut self) -> Vec<&mut GeneratorNet> {
        match self {
            Margin::Net(n) => vec![n],
            Margin::PreAnm(p) => vec![&mut p.outer, &mut p.noise_net],
            Margin::ClosedForm(_) => Vec::new(),
        }
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        match self {
            Margin::Net(n) => {
                w.write_all(&[0])?;
                n.write_to(w)
            }
            Margin::PreAnm(p) => {
                w.write_all(&[1])?;
                p.outer.write_to(w)?;
                p.noise_net.write_to(w)
            }
            Margin::ClosedForm(c) => {
                w.write_all(&[2])?;
                let (kind, a, b, extra) = match c {
                    ClosedFormMargin::Gaussian { loc, sd } => (0u8, loc.intercept, &loc.slope, *sd),
                    ClosedFormMargin::Laplace { loc, scale } => (1, loc.intercept, &loc.slope, *scale),
                    ClosedFormMargin::Exponential { rate } => (2, rate.intercept, &rate.slope, 0.0),
                };
                w.write_all(&[kind])?;
                write_u32(w, b.len())?;
                write_f64s(w, &[a, extra])?;
                write_f64s(w, b)
            }
        }
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)?;
        match tag[0] {
            0 => Ok(Margin::Net(GeneratorNet::read_from(r)?)),
            1 => {
                let outer = GeneratorNet::read_from(r)?;
                let noise_net = GeneratorNet::read_from(r)?;
                Ok(Margin::PreAnm(PreAnmMargin::from_nets(outer, noise_net)?))
            }
            2 => {
                let mut kind = [0u8; 1];
                r.read_exact(&mut kind)?;
                let d = read_u32(r)?;
                let head = read_f64s(r, 2)?;
                let slope = read_f64s(r, d)?;
                let affine = crate::margin::Affine::new(head[0], slope);
                let c = match kind[0] {
                    0 => ClosedFormMargin::Gaussian { loc: affine, sd: head[1] },
                    1 => ClosedFormMargin::Laplace { loc: affine, scale: head[1] },
                    2 => ClosedFormMargin::Exponential { rate: affine },
                    k => return Err(Error::Format(format!("unknown closed-form kind {k}"))),
                };
                Ok(Margin::ClosedForm(c))
            }
            t => Err(Error::Format(format!("unknown margin tag {t}"))),
        }
    }
}

impl BoundMargin {
    pub fn forward(&self, tape: &mut Tape, x: Var, eta: Var) -> Result<Var> {
        match self {
            BoundMargin::Net(n) => {
                let input = tape.hcat(&[x, eta])?;
                n.forward(tape, input)
            }
            BoundMargin::PreAnm { outer, noise_net } => {
                let shift = noise_net.forward(tape, eta)?;
                let u = tape.add(x, shift)?;
                outer.forward(tape, u)
            }
        }
    }

    pub fn collect_grads(&self, margin: &Margin, grads: &Gradients) -> Vec<Matrix> {
        match (self, margin) {
            (BoundMargin::Net(b), Margin::Net(n)) => n.collect_grads(b, grads),
            (BoundMargin::PreAnm { outer, noise_net }, Margin::PreAnm(p)) => {
                let mut g = p.outer.collect_grads(outer, grads);
                g.extend(p.noise_net.collect_grads(noise_net, grads));
                g
            }
            _ => unreachable!("bound margin does not match its margin"),
        }
    }
}

const NET_MAGIC: &[u8; 4] = b"FGN1";

fn write_u32(w: &mut impl Write, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<usize> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b) as usize)
}

pub(crate) fn write_f64s(w: &mut impl Write, vals: &[f64]) -> Result<()> {
    for v in vals {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub(crate) fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    let mut b = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut b)?;
        out.push(f64::from_le_bytes(b));
    }
    Ok(out)
}
