//! Small reverse-mode differentiation tape over dense matrices.
//!
//! Every primitive appends a node holding its forward value. Parents always
//! precede children, so reverse tape order is a valid topological order for
//! the backward sweep and gradients accumulate in a fixed order.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::SparseSym;

pub type Tensor = DMatrix<f64>;

/// Denominator guard for normalizations and cosine similarity.
pub const NORM_EPS: f64 = 1e-12;

/// Handle to a tape node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op<'a> {
    Leaf,
    MatMul(Var, Var),
    SparseMatMul(&'a SparseSym, Var),
    Add(Var, Var),
    AddRowBias(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Prelu(Var, Var),
    RowL2Normalize(Var),
    MeanAll(Var),
    SumRows(Var),
    CosineRows(Var, Var),
}

impl Op<'_> {
    fn parents(&self) -> [Option<Var>; 2] {
        match *self {
            Op::Leaf => [None, None],
            Op::SparseMatMul(_, a)
            | Op::Scale(a, _)
            | Op::Relu(a)
            | Op::RowL2Normalize(a)
            | Op::MeanAll(a)
            | Op::SumRows(a) => [Some(a), None],
            Op::MatMul(a, b) | Op::Add(a, b) | Op::AddRowBias(a, b) | Op::Prelu(a, b) | Op::CosineRows(a, b) => {
                [Some(a), Some(b)]
            }
        }
    }
}

#[derive(Clone, Debug)]
struct Node<'a> {
    op: Op<'a>,
    value: Tensor,
    requires_grad: bool,
}

/// Ordered record of primitive applications.
#[derive(Clone, Debug, Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
}

/// Gradients of a scalar with respect to every node that requires one.
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

fn shape(m: &Tensor) -> (usize, usize) {
    m.shape()
}

fn mismatch(op: &str, a: (usize, usize), b: (usize, usize)) -> Error {
    Error::Shape(format!("{op}: {}x{} vs {}x{}", a.0, a.1, b.0, b.1))
}

fn column_sums(x: &Tensor) -> Tensor {
    let s = x.row_sum();
    Tensor::from_row_slice(1, s.len(), s.as_slice())
}

fn cosine_parts(a: &Tensor, b: &Tensor, i: usize) -> (f64, f64, f64) {
    let (mut dot, mut na2, mut nb2) = (0.0, 0.0, 0.0);
    for j in 0..a.ncols() {
        let (x, y) = (a[(i, j)], b[(i, j)]);
        dot += x * y;
        na2 += x * x;
        nb2 += y * y;
    }
    (dot, na2, nb2)
}

fn forward<'t>(op: &Op<'_>, v: impl Fn(Var) -> &'t Tensor) -> Tensor {
    match *op {
        Op::Leaf => unreachable!("leaves are not recomputed"),
        Op::MatMul(a, b) => v(a) * v(b),
        Op::SparseMatMul(s, a) => s.mul_dense(v(a)).expect("checked on record"),
        Op::Add(a, b) => v(a) + v(b),
        Op::AddRowBias(a, b) => {
            let mut out = v(a).clone();
            let bias = v(b);
            for mut row in out.row_iter_mut() {
                row += bias;
            }
            out
        }
        Op::Scale(a, s) => v(a) * s,
        Op::Relu(a) => v(a).map(|x| if x > 0.0 { x } else { 0.0 }),
        Op::Prelu(a, p) => {
            let (x, p) = (v(a), v(p));
            let per_col = p.ncols() > 1;
            Tensor::from_fn(x.nrows(), x.ncols(), |i, j| {
                let s = if per_col { p[(0, j)] } else { p[(0, 0)] };
                let e = x[(i, j)];
                if e > 0.0 {
                    e
                } else {
                    s * e
                }
            })
        }
        Op::RowL2Normalize(a) => {
            let x = v(a);
            let mut out = x.clone();
            for (i, mut row) in out.row_iter_mut().enumerate() {
                let norm = x.row(i).norm().max(NORM_EPS);
                row /= norm;
            }
            out
        }
        Op::MeanAll(a) => {
            let x = v(a);
            let len = (x.nrows() * x.ncols()).max(1) as f64;
            Tensor::from_element(1, 1, x.sum() / len)
        }
        Op::SumRows(a) => column_sums(v(a)),
        Op::CosineRows(a, b) => {
            let (x, y) = (v(a), v(b));
            Tensor::from_fn(x.nrows(), 1, |i, _| {
                let (dot, na2, nb2) = cosine_parts(x, y, i);
                dot / (na2 * nb2).sqrt().max(NORM_EPS)
            })
        }
    }
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op: Op::Leaf,
            value,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Leaf that receives a gradient.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    /// Leaf without gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn dims(&self, v: Var) -> (usize, usize) {
        shape(&self.nodes[v.0].value)
    }

    fn push(&mut self, op: Op<'a>) -> Var {
        let value = forward(&op, |x| &self.nodes[x.0].value);
        let requires_grad = op.parents().iter().flatten().any(|p| self.nodes[p.0].requires_grad);
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (da, db) = (self.dims(a), self.dims(b));
        if da.1 != db.0 {
            return Err(mismatch("matmul", da, db));
        }
        Ok(self.push(Op::MatMul(a, b)))
    }

    /// `S x` for a symmetric sparse `S`.
    pub fn sparse_matmul(&mut self, s: &'a SparseSym, x: Var) -> Result<Var> {
        let dx = self.dims(x);
        if s.dim() != dx.0 {
            return Err(mismatch("sparse_matmul", (s.dim(), s.dim()), dx));
        }
        Ok(self.push(Op::SparseMatMul(s, x)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (da, db) = (self.dims(a), self.dims(b));
        if da != db {
            return Err(mismatch("add", da, db));
        }
        Ok(self.push(Op::Add(a, b)))
    }

    /// Adds the `1 x c` row `bias` to every row of `a`.
    pub fn add_row_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (da, db) = (self.dims(a), self.dims(bias));
        if db.0 != 1 || db.1 != da.1 {
            return Err(mismatch("add_row_bias", da, db));
        }
        Ok(self.push(Op::AddRowBias(a, bias)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        self.push(Op::Scale(a, s))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.push(Op::Relu(a))
    }

    /// Parametric ReLU with a `1 x 1` shared or `1 x c` per-column slope.
    pub fn prelu(&mut self, a: Var, slope: Var) -> Result<Var> {
        let (da, ds) = (self.dims(a), self.dims(slope));
        if ds.0 != 1 || (ds.1 != 1 && ds.1 != da.1) {
            return Err(mismatch("prelu", da, ds));
        }
        Ok(self.push(Op::Prelu(a, slope)))
    }

    pub fn row_l2_normalize(&mut self, a: Var) -> Var {
        self.push(Op::RowL2Normalize(a))
    }

    /// Mean of all entries as a `1 x 1` tensor.
    pub fn mean_all(&mut self, a: Var) -> Var {
        self.push(Op::MeanAll(a))
    }

    /// Column sums as a `1 x c` tensor.
    pub fn sum_rows(&mut self, a: Var) -> Var {
        self.push(Op::SumRows(a))
    }

    /// Row-wise cosine similarity as an `n x 1` tensor.
    pub fn cosine_rows(&mut self, a: Var, b: Var) -> Result<Var> {
        let (da, db) = (self.dims(a), self.dims(b));
        if da != db {
            return Err(mismatch("cosine_rows", da, db));
        }
        Ok(self.push(Op::CosineRows(a, b)))
    }

    /// Recomputes every non-leaf value from the stored leaves.
    pub fn replay(&self) -> Vec<Tensor> {
        let mut values: Vec<Tensor> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match node.op {
                Op::Leaf => node.value.clone(),
                ref op => forward(op, |x| &values[x.0]),
            };
            values.push(v);
        }
        values
    }

    /// Reverse sweep from a `1 x 1` output.
    ///
    /// Leaves that require a gradient but do not influence `loss` get zeros.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if loss.0 >= self.nodes.len() {
            return Err(Error::Structure(format!("variable {} not on this tape", loss.0)));
        }
        let dl = self.dims(loss);
        if dl != (1, 1) {
            return Err(Error::Shape(format!("backward needs a scalar, got {}x{}", dl.0, dl.1)));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::from_element(1, 1, 1.0));
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            for p in node.op.parents().into_iter().flatten() {
                if p.0 >= idx {
                    return Err(Error::Structure(format!("tape cycle: node {idx} depends on {}", p.0)));
                }
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if matches!(node.op, Op::Leaf) && node.requires_grad && grads[i].is_none() {
                let (r, c) = shape(&node.value);
                grads[i] = Some(Tensor::zeros(r, c));
            }
            if !node.requires_grad {
                grads[i] = None;
            }
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let val = |v: Var| &self.nodes[v.0].value;
        let wants = |v: Var| self.nodes[v.0].requires_grad;
        let mut acc = |v: Var, d: Tensor| {
            if !wants(v) {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => *existing += d,
                slot => *slot = Some(d),
            }
        };
        match self.nodes[idx].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if wants(a) {
                    acc(a, g * val(b).transpose());
                }
                if wants(b) {
                    acc(b, val(a).transpose() * g);
                }
            }
            Op::SparseMatMul(s, a) => {
                if wants(a) {
                    acc(a, s.mul_dense(g).expect("shape checked on record"));
                }
            }
            Op::Add(a, b) => {
                acc(a, g.clone());
                acc(b, g.clone());
            }
            Op::AddRowBias(a, b) => {
                acc(a, g.clone());
                acc(b, column_sums(g));
            }
            Op::Scale(a, s) => acc(a, g * s),
            Op::Relu(a) => {
                let x = val(a);
                acc(a, g.zip_map(x, |gi, xi| if xi > 0.0 { gi } else { 0.0 }));
            }
            Op::Prelu(a, p) => {
                let (x, slope) = (val(a), val(p));
                let per_col = slope.ncols() > 1;
                let s = |j: usize| if per_col { slope[(0, j)] } else { slope[(0, 0)] };
                if wants(a) {
                    acc(
                        a,
                        Tensor::from_fn(x.nrows(), x.ncols(), |i, j| {
                            if x[(i, j)] > 0.0 {
                                g[(i, j)]
                            } else {
                                s(j) * g[(i, j)]
                            }
                        }),
                    );
                }
                if wants(p) {
                    let mut gp = Tensor::zeros(1, slope.ncols());
                    for i in 0..x.nrows() {
                        for j in 0..x.ncols() {
                            if x[(i, j)] <= 0.0 {
                                gp[(0, if per_col { j } else { 0 })] += g[(i, j)] * x[(i, j)];
                            }
                        }
                    }
                    acc(p, gp);
                }
            }
            Op::RowL2Normalize(a) => {
                let x = val(a);
                let y = &self.nodes[idx].value;
                let mut d = Tensor::zeros(x.nrows(), x.ncols());
                for i in 0..x.nrows() {
                    let norm = x.row(i).norm();
                    if norm > NORM_EPS {
                        let proj = y.row(i).dot(&g.row(i));
                        for j in 0..x.ncols() {
                            d[(i, j)] = (g[(i, j)] - y[(i, j)] * proj) / norm;
                        }
                    } else {
                        for j in 0..x.ncols() {
                            d[(i, j)] = g[(i, j)] / NORM_EPS;
                        }
                    }
                }
                acc(a, d);
            }
            Op::MeanAll(a) => {
                let (r, c) = self.dims(a);
                let len = (r * c).max(1) as f64;
                acc(a, Tensor::from_element(r, c, g[(0, 0)] / len));
            }
            Op::SumRows(a) => {
                let (r, c) = self.dims(a);
                acc(a, Tensor::from_fn(r, c, |_, j| g[(0, j)]));
            }
            Op::CosineRows(a, b) => {
                let (x, y) = (val(a), val(b));
                let (r, c) = shape(x);
                let mut da = Tensor::zeros(r, c);
                let mut db = Tensor::zeros(r, c);
                for i in 0..r {
                    let (dot, na2, nb2) = cosine_parts(x, y, i);
                    let denom = (na2 * nb2).sqrt();
                    let gi = g[(i, 0)];
                    if denom > NORM_EPS {
                        let s = dot / denom;
                        for j in 0..c {
                            da[(i, j)] = gi * (y[(i, j)] / denom - s * x[(i, j)] / na2);
                            db[(i, j)] = gi * (x[(i, j)] / denom - s * y[(i, j)] / nb2);
                        }
                    } else {
                        for j in 0..c {
                            da[(i, j)] = gi * y[(i, j)] / NORM_EPS;
                            db[(i, j)] = gi * x[(i, j)] / NORM_EPS;
                        }
                    }
                }
                if wants(a) {
                    acc(a, da);
                }
                if wants(b) {
                    acc(b, db);
                }
            }
        }
    }
}
