use crate::matrix::{gemm, GemmOperand};
use crate::{Matrix, NdiffError, Result};

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// The elementary operation that produced a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Constant,
    Param,
    MatMul,
    Add,
    Sub,
    AddRow,
    Scale,
    Relu,
    Hcat,
    SliceRows,
    SliceCols,
    RowNorms,
    Sum,
}

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    AddRow(usize, usize),
    Scale(usize, f64),
    Relu(usize),
    Hcat(Vec<usize>),
    SliceRows(usize, usize),
    SliceCols(usize, usize),
    RowNorms(usize),
    Sum(usize),
}

impl Op {
    fn kind(&self) -> OpKind {
        match self {
            Op::Constant => OpKind::Constant,
            Op::Param => OpKind::Param,
            Op::MatMul(..) => OpKind::MatMul,
            Op::Add(..) => OpKind::Add,
            Op::Sub(..) => OpKind::Sub,
            Op::AddRow(..) => OpKind::AddRow,
            Op::Scale(..) => OpKind::Scale,
            Op::Relu(_) => OpKind::Relu,
            Op::Hcat(_) => OpKind::Hcat,
            Op::SliceRows(..) => OpKind::SliceRows,
            Op::SliceCols(..) => OpKind::SliceCols,
            Op::RowNorms(_) => OpKind::RowNorms,
            Op::Sum(_) => OpKind::Sum,
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    value: Matrix,
    op: Op,
    needs_grad: bool,
}

/// Append-only record of a forward computation.
///
/// Parents always precede children, so the graph is acyclic by construction.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar root with respect to every parameter leaf that
/// reaches it. Leaves without a path to the root are absent.
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    entries: Vec<(Var, Matrix)>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.entries.binary_search_by_key(&v, |(k, _)| *k).ok().map(|i| &self.entries[i].1)
    }

    /// Gradient for `v`, or zeros of `shape` when `v` does not reach the root.
    pub fn get_or_zeros(&self, v: Var, shape: (usize, usize)) -> Matrix {
        self.get(v).cloned().unwrap_or_else(|| Matrix::zeros(shape.0, shape.1))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Var, &Matrix)> {
        self.entries.iter().map(|(v, m)| (*v, m))
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn kind(&self, v: Var) -> OpKind {
        self.nodes[v.0].op.kind()
    }

    /// Scalar value of a 1x1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        let m = self.value(v);
        debug_assert_eq!(m.shape(), (1, 1));
        m.data()[0]
    }

    fn push(&mut self, value: Matrix, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Constant, false)
    }

    /// Registers a trainable leaf; its gradient is reported by [`Tape::backward`].
    pub fn param(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Param, true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::MatMul(a.0, b.0), ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Add(a.0, b.0), ng))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).sub(self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Sub(a.0, b.0), ng))
    }

    /// Broadcast-adds a `1 x cols` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let value = self.value(a).add_row(self.value(bias))?;
        let ng = self.needs(a) || self.needs(bias);
        Ok(self.push(value, Op::AddRow(a.0, bias.0), ng))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a).scale(s);
        let ng = self.needs(a);
        self.push(value, Op::Scale(a.0, s), ng)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|v| if v > 0.0 { v } else { 0.0 });
        let ng = self.needs(a);
        self.push(value, Op::Relu(a.0), ng)
    }

    pub fn hcat(&mut self, parts: &[Var]) -> Result<Var> {
        let mats: Vec<&Matrix> = parts.iter().map(|&p| self.value(p)).collect();
        let value = Matrix::hcat(&mats)?;
        let ng = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(value, Op::Hcat(parts.iter().map(|p| p.0).collect()), ng))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let value = self.value(a).slice_rows(start, len)?;
        let ng = self.needs(a);
        Ok(self.push(value, Op::SliceRows(a.0, start), ng))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let value = self.value(a).slice_cols(start, len)?;
        let ng = self.needs(a);
        Ok(self.push(value, Op::SliceCols(a.0, start), ng))
    }

    /// Per-row Euclidean norm, `n x d -> n x 1`. The subgradient at a zero row is zero.
    pub fn row_norms(&mut self, a: Var) -> Var {
        let value = self.value(a).row_norms();
        let ng = self.needs(a);
        self.push(value, Op::RowNorms(a.0), ng)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Matrix::scalar(self.value(a).sum());
        let ng = self.needs(a);
        self.push(value, Op::Sum(a.0), ng)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len().max(1) as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// Reverse sweep from a scalar root.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let (rows, cols) = self.shape(root);
        if (rows, cols) != (1, 1) {
            return Err(NdiffError::NonScalarRoot { rows, cols });
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; root.0 + 1];
        grads[root.0] = Some(Matrix::scalar(1.0));
        let mut out = Vec::new();

        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            match &node.op {
                Op::Constant => {}
                Op::Param => out.push((Var(i), g)),
                Op::MatMul(a, b) => {
                    let (a, b) = (*a, *b);
                    if self.nodes[a].needs_grad {
                        let bv = &self.nodes[b].value;
                        let mut da = Matrix::zeros(g.rows(), bv.rows());
                        gemm(GemmOperand::plain(&g), GemmOperand::transposed(bv), &mut da, 0.0);
                        accumulate(&mut grads[a], da);
                    }
                    if self.nodes[b].needs_grad {
                        let av = &self.nodes[a].value;
                        let mut db = Matrix::zeros(av.cols(), g.cols());
                        gemm(GemmOperand::transposed(av), GemmOperand::plain(&g), &mut db, 0.0);
                        accumulate(&mut grads[b], db);
                    }
                }
                Op::Add(a, b) => {
                    let (a, b) = (*a, *b);
                    if self.nodes[b].needs_grad {
                        accumulate(&mut grads[b], g.clone());
                    }
                    if self.nodes[a].needs_grad {
                        accumulate(&mut grads[a], g);
                    }
                }
                Op::Sub(a, b) => {
                    let (a, b) = (*a, *b);
                    if self.nodes[b].needs_grad {
                        accumulate(&mut grads[b], g.scale(-1.0));
                    }
                    if self.nodes[a].needs_grad {
                        accumulate(&mut grads[a], g);
                    }
                }
                Op::AddRow(a, bias) => {
                    let (a, bias) = (*a, *bias);
                    if self.nodes[bias].needs_grad {
                        let mut db = Matrix::zeros(1, g.cols());
                        for row in g.iter_rows() {
                            for (d, v) in db.data_mut().iter_mut().zip(row) {
                                *d += v;
                            }
                        }
                        accumulate(&mut grads[bias], db);
                    }
                    if self.nodes[a].needs_grad {
                        accumulate(&mut grads[a], g);
                    }
                }
                Op::Scale(a, s) => accumulate(&mut grads[*a], g.scale(*s)),
                Op::Relu(a) => {
                    let x = &self.nodes[*a].value;
                    let mut d = g;
                    for (dv, &xv) in d.data_mut().iter_mut().zip(x.data()) {
                        if xv <= 0.0 {
                            *dv = 0.0;
                        }
                    }
                    accumulate(&mut grads[*a], d);
                }
                Op::Hcat(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let w = self.nodes[p].value.cols();
                        if self.nodes[p].needs_grad {
                            accumulate(&mut grads[p], g.slice_cols(start, w)?);
                        }
                        start += w;
                    }
                }
                Op::SliceRows(a, start) => {
                    let src = &self.nodes[*a].value;
                    let mut d = Matrix::zeros(src.rows(), src.cols());
                    let off = start * src.cols();
                    d.data_mut()[off..off + g.len()].copy_from_slice(g.data());
                    accumulate(&mut grads[*a], d);
                }
                Op::SliceCols(a, start) => {
                    let src = &self.nodes[*a].value;
                    let mut d = Matrix::zeros(src.rows(), src.cols());
                    for r in 0..g.rows() {
                        d.row_mut(r)[*start..*start + g.cols()].copy_from_slice(g.row(r));
                    }
                    accumulate(&mut grads[*a], d);
                }
                Op::RowNorms(a) => {
                    let x = &self.nodes[*a].value;
                    let norms = &node.value;
                    let mut d = Matrix::zeros(x.rows(), x.cols());
                    for r in 0..x.rows() {
                        let nrm = norms.data()[r];
                        if nrm > 0.0 {
                            let k = g.data()[r] / nrm;
                            for (dv, &xv) in d.row_mut(r).iter_mut().zip(x.row(r)) {
                                *dv = k * xv;
                            }
                        }
                    }
                    accumulate(&mut grads[*a], d);
                }
                Op::Sum(a) => {
                    let (r, c) = self.nodes[*a].value.shape();
                    accumulate(&mut grads[*a], Matrix::filled(r, c, g.data()[0]));
                }
            }
        }
        out.sort_by_key(|(v, _)| *v);
        Ok(Gradients { entries: out })
    }
}

fn accumulate(slot: &mut Option<Matrix>, g: Matrix) {
    match slot {
        Some(existing) => existing.add_assign(&g).expect("gradient shapes are fixed by the forward pass"),
        None => *slot = Some(g),
    }
}
