//! GCN and GIN encoders with MLP projector heads.
//!
//! Parameters live in named [`Params`] maps so teacher and student share one
//! layout and EMA, optimizers and checkpoints can walk them uniformly.
//! Names: `enc.{l}.*` for encoder layers, `proj.*` for the projector and
//! `head.*` for the teacher-only extra head.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::graph::{NormalizedLaplacian, SparseSym};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EncoderKind {
    Gcn,
    Gin,
}

impl EncoderKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gcn" => Some(Self::Gcn),
            "gin" => Some(Self::Gin),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Gcn => "gcn",
            Self::Gin => "gin",
        }
    }
}

/// Where the adversarial perturbation is added inside the teacher encoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PerturbSite {
    FirstHidden,
    LastHidden,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: EncoderKind,
    pub in_dim: usize,
    /// Encoder layer widths; GIN layers must share one width.
    pub hidden: Vec<usize>,
    /// Hidden width of the projector and head MLPs.
    pub proj_hidden: usize,
}

impl ModelSpec {
    pub fn gcn(in_dim: usize) -> Self {
        Self {
            kind: EncoderKind::Gcn,
            in_dim,
            hidden: vec![512, 256],
            proj_hidden: 512,
        }
    }

    pub fn gin(in_dim: usize) -> Self {
        Self {
            kind: EncoderKind::Gin,
            in_dim,
            hidden: vec![512; 3],
            proj_hidden: 512,
        }
    }

    pub fn out_dim(&self) -> usize {
        *self.hidden.last().unwrap_or(&self.in_dim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) || self.proj_hidden == 0 {
            return Err(Error::param("hidden", "need at least one layer and non-zero widths"));
        }
        if self.kind == EncoderKind::Gin && self.hidden.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::param("hidden", "GIN readout averages layers, widths must match"));
        }
        Ok(())
    }
}

/// Named parameter tensors in deterministic order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Params {
    tensors: BTreeMap<String, Tensor>,
}

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        self.tensors.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.tensors.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor)> {
        self.tensors.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.tensors.keys()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Zero tensors with the same names and shapes.
    pub fn zeros_like(&self) -> Self {
        Self {
            tensors: self
                .tensors
                .iter()
                .map(|(k, v)| (k.clone(), Tensor::zeros(v.nrows(), v.ncols())))
                .collect(),
        }
    }

    /// Entries whose name does not start with `prefix`.
    pub fn without_prefix(&self, prefix: &str) -> Self {
        Self {
            tensors: self
                .tensors
                .iter()
                .filter(|(k, _)| !k.starts_with(prefix))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }

    pub fn same_layout(&self, other: &Params) -> bool {
        self.tensors.len() == other.tensors.len()
            && self
                .tensors
                .iter()
                .zip(&other.tensors)
                .all(|((ka, va), (kb, vb))| ka == kb && va.shape() == vb.shape())
    }

    pub fn sq_norm(&self) -> f64 {
        self.tensors.values().map(|t| t.norm_squared()).sum()
    }

    /// SHA-256 over names, shapes and little-endian values.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for (k, t) in &self.tensors {
            h.update((k.len() as u64).to_le_bytes());
            h.update(k.as_bytes());
            h.update((t.nrows() as u64).to_le_bytes());
            h.update((t.ncols() as u64).to_le_bytes());
            for i in 0..t.nrows() {
                for j in 0..t.ncols() {
                    h.update(t[(i, j)].to_le_bytes());
                }
            }
        }
        h.finalize().into()
    }

    /// Places every tensor on the tape.
    pub fn bind<'a>(&self, tape: &mut Tape<'a>, trainable: bool) -> Bound {
        Bound {
            vars: self
                .tensors
                .iter()
                .map(|(k, v)| (k.clone(), tape.leaf(v.clone(), trainable)))
                .collect(),
        }
    }
}

/// Parameters placed on a tape.
#[derive(Clone, Debug)]
pub struct Bound {
    vars: BTreeMap<String, Var>,
}

impl Bound {
    pub fn var(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::Structure(format!("missing parameter `{name}`")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Var)> {
        self.vars.iter()
    }
}

fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-a..=a))
}

const PRELU_INIT: f64 = 0.25;

fn add_mlp(p: &mut Params, rng: &mut ChaCha8Rng, prefix: &str, dims: [usize; 3]) {
    p.insert(format!("{prefix}.0.w"), glorot(rng, dims[0], dims[1]));
    p.insert(format!("{prefix}.0.b"), Tensor::zeros(1, dims[1]));
    p.insert(format!("{prefix}.act"), Tensor::from_element(1, 1, PRELU_INIT));
    p.insert(format!("{prefix}.1.w"), glorot(rng, dims[1], dims[2]));
    p.insert(format!("{prefix}.1.b"), Tensor::zeros(1, dims[2]));
}

/// Encoder plus projector, randomly initialized.
pub fn init_encoder(spec: &ModelSpec, seed: u64) -> Result<Params> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = Params::new();
    let mut d = spec.in_dim;
    for (l, &h) in spec.hidden.iter().enumerate() {
        match spec.kind {
            EncoderKind::Gcn => {
                p.insert(format!("enc.{l}.w"), glorot(&mut rng, d, h));
                p.insert(format!("enc.{l}.b"), Tensor::zeros(1, h));
                p.insert(format!("enc.{l}.act"), Tensor::from_element(1, 1, PRELU_INIT));
            }
            EncoderKind::Gin => {
                p.insert(format!("enc.{l}.w1"), glorot(&mut rng, d, h));
                p.insert(format!("enc.{l}.b1"), Tensor::zeros(1, h));
                p.insert(format!("enc.{l}.w2"), glorot(&mut rng, h, h));
                p.insert(format!("enc.{l}.b2"), Tensor::zeros(1, h));
            }
        }
        d = h;
    }
    add_mlp(&mut p, &mut rng, "proj", [d, spec.proj_hidden, d]);
    Ok(p)
}

/// Teacher parameters: encoder, projector and the extra head.
pub fn init_teacher(spec: &ModelSpec, seed: u64) -> Result<Params> {
    let mut p = init_encoder(spec, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4ead);
    let d = spec.out_dim();
    add_mlp(&mut p, &mut rng, "head", [d, spec.proj_hidden, d]);
    Ok(p)
}

/// Student starts as a copy of the teacher's shared parameters.
pub fn student_from_teacher(teacher: &Params) -> Params {
    teacher.without_prefix("head.")
}

/// Makes the MLP at `prefix` the identity map (needs `proj_hidden == dim`).
pub fn set_identity_mlp(p: &mut Params, prefix: &str) -> Result<()> {
    let w0 = p
        .get(&format!("{prefix}.0.w"))
        .ok_or_else(|| Error::Structure(format!("no MLP `{prefix}`")))?;
    let (a, b) = w0.shape();
    let c = p.get(&format!("{prefix}.1.w")).map_or(0, |w| w.ncols());
    if a != b || b != c {
        return Err(Error::Shape(format!("identity MLP needs square layers, got {a}x{b}, {b}x{c}")));
    }
    for l in 0..2 {
        p.insert(format!("{prefix}.{l}.w"), Tensor::identity(a, a));
        p.insert(format!("{prefix}.{l}.b"), Tensor::zeros(1, a));
    }
    p.insert(format!("{prefix}.act"), Tensor::from_element(1, 1, 1.0));
    Ok(())
}

fn linear(tape: &mut Tape<'_>, bound: &Bound, x: Var, w: &str, b: &str) -> Result<Var> {
    let y = tape.matmul(x, bound.var(w)?)?;
    tape.add_row_bias(y, bound.var(b)?)
}

/// Linear, PReLU, linear.
pub fn mlp_forward(tape: &mut Tape<'_>, bound: &Bound, prefix: &str, x: Var) -> Result<Var> {
    let h = linear(tape, bound, x, &format!("{prefix}.0.w"), &format!("{prefix}.0.b"))?;
    let h = tape.prelu(h, bound.var(&format!("{prefix}.act"))?)?;
    linear(tape, bound, h, &format!("{prefix}.1.w"), &format!("{prefix}.1.b"))
}

/// Encoder input on a tape.
pub enum EncoderInput<'a> {
    /// Node task: propagation matrix `I - L_view` and node features.
    Nodes { prop: &'a SparseSym, x: Var },
    /// Graph task over a disjoint union: `I + A` aggregation, `B x N`
    /// sum-pooling matrix and stacked node features.
    Graphs { agg: &'a SparseSym, pool: Var, x: Var },
}

/// Optional perturbation added at a hidden layer.
#[derive(Clone, Copy, Debug)]
pub struct Perturbation {
    pub site: PerturbSite,
    pub delta: Var,
}

/// Runs the encoder; returns node embeddings (GCN) or pooled graph
/// embeddings (GIN).
pub fn encoder_forward<'a>(
    tape: &mut Tape<'a>,
    spec: &ModelSpec,
    bound: &Bound,
    input: &EncoderInput<'a>,
    perturb: Option<Perturbation>,
) -> Result<Var> {
    let layers = spec.hidden.len();
    let add_delta = |tape: &mut Tape<'a>, h: Var, l: usize| -> Result<Var> {
        match perturb {
            Some(p) if (p.site == PerturbSite::FirstHidden && l == 0) || (p.site == PerturbSite::LastHidden && l + 1 == layers) => {
                tape.add(h, p.delta)
            }
            _ => Ok(h),
        }
    };
    match (spec.kind, input) {
        (EncoderKind::Gcn, EncoderInput::Nodes { prop, x }) => {
            let mut h = *x;
            for l in 0..layers {
                let xw = tape.matmul(h, bound.var(&format!("enc.{l}.w"))?)?;
                let ax = tape.sparse_matmul(prop, xw)?;
                let z = tape.add_row_bias(ax, bound.var(&format!("enc.{l}.b"))?)?;
                h = tape.prelu(z, bound.var(&format!("enc.{l}.act"))?)?;
                h = add_delta(tape, h, l)?;
            }
            Ok(h)
        }
        (EncoderKind::Gin, EncoderInput::Graphs { agg, pool, x }) => {
            let mut h = *x;
            let mut readout: Option<Var> = None;
            for l in 0..layers {
                let s = tape.sparse_matmul(agg, h)?;
                let z = linear(tape, bound, s, &format!("enc.{l}.w1"), &format!("enc.{l}.b1"))?;
                let z = tape.relu(z);
                let z = linear(tape, bound, z, &format!("enc.{l}.w2"), &format!("enc.{l}.b2"))?;
                h = tape.relu(z);
                h = add_delta(tape, h, l)?;
                let pooled = tape.matmul(*pool, h)?;
                readout = Some(match readout {
                    None => pooled,
                    Some(r) => tape.add(r, pooled)?,
                });
            }
            let r = readout.expect("at least one layer");
            Ok(tape.scale(r, 1.0 / layers as f64))
        }
        (kind, _) => Err(Error::Structure(format!("{} encoder got the wrong input kind", kind.name()))),
    }
}

/// Teacher output: projector then extra head.
pub fn teacher_project(tape: &mut Tape<'_>, bound: &Bound, h: Var) -> Result<Var> {
    let q = mlp_forward(tape, bound, "proj", h)?;
    mlp_forward(tape, bound, "head", q)
}

/// Student output: projector only.
pub fn student_project(tape: &mut Tape<'_>, bound: &Bound, h: Var) -> Result<Var> {
    mlp_forward(tape, bound, "proj", h)
}

/// Node embeddings of a GCN on one view, without a tape.
pub fn gcn_forward(view: &NormalizedLaplacian, x: &Tensor, spec: &ModelSpec, params: &Params) -> Result<Tensor> {
    check_features(x, spec)?;
    if x.nrows() != view.dim() {
        return Err(Error::Shape(format!("{} feature rows for {} nodes", x.nrows(), view.dim())));
    }
    let prop = view.propagation();
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, false);
    let xv = tape.constant(x.clone());
    let h = encoder_forward(&mut tape, spec, &bound, &EncoderInput::Nodes { prop: &prop, x: xv }, None)?;
    Ok(tape.value(h).clone())
}

/// Pooled GIN embeddings for a set of views with their features.
pub fn gin_forward(views: &[(&NormalizedLaplacian, &Tensor)], spec: &ModelSpec, params: &Params) -> Result<Tensor> {
    let batch = GraphBatch::from_views(views, spec)?;
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, false);
    let (pool, x) = (tape.constant(batch.pool.clone()), tape.constant(batch.x.clone()));
    let h = encoder_forward(&mut tape, spec, &bound, &EncoderInput::Graphs { agg: &batch.agg, pool, x }, None)?;
    Ok(tape.value(h).clone())
}

fn check_features(x: &Tensor, spec: &ModelSpec) -> Result<()> {
    if x.ncols() != spec.in_dim {
        return Err(Error::Shape(format!("features have {} columns, model expects {}", x.ncols(), spec.in_dim)));
    }
    Ok(())
}

/// Binary adjacency read off a (possibly augmented) Laplacian view.
///
/// Off-diagonal entries of `I - L_view` are rescaled by `sqrt(d_i d_j)` with
/// the original degrees (isolated nodes count as degree 1) and kept when
/// above 0.5. On an unaugmented view this recovers the adjacency exactly.
pub fn binary_adjacency(view: &NormalizedLaplacian) -> Vec<(usize, usize)> {
    let scale: Vec<f64> = view
        .degree_root_inv
        .iter()
        .map(|&r| if r > 0.0 { 1.0 / r } else { 1.0 })
        .collect();
    view.matrix
        .entries()
        .iter()
        .filter(|&&(i, j, v)| i != j && -v * scale[i] * scale[j] > 0.5)
        .map(|&(i, j, _)| (j, i))
        .collect()
}

/// Disjoint union of several graphs for GIN.
#[derive(Clone, Debug)]
pub struct GraphBatch {
    /// `I + A` over the union.
    pub agg: SparseSym,
    /// `B x N` indicator used for sum pooling.
    pub pool: Tensor,
    pub x: Tensor,
}

impl GraphBatch {
    pub fn from_views(views: &[(&NormalizedLaplacian, &Tensor)], spec: &ModelSpec) -> Result<Self> {
        let total: usize = views.iter().map(|(v, _)| v.dim()).sum();
        let mut trip = Vec::new();
        let mut pool = Tensor::zeros(views.len(), total);
        let mut x = Tensor::zeros(total, spec.in_dim);
        let mut off = 0;
        for (g, (view, feats)) in views.iter().enumerate() {
            check_features(feats, spec)?;
            if feats.nrows() != view.dim() {
                return Err(Error::Shape(format!("graph {g}: {} feature rows for {} nodes", feats.nrows(), view.dim())));
            }
            for i in 0..view.dim() {
                trip.push((off + i, off + i, 1.0));
                pool[(g, off + i)] = 1.0;
            }
            for (a, b) in binary_adjacency(view) {
                trip.push((off + b, off + a, 1.0));
            }
            x.view_mut((off, 0), (view.dim(), spec.in_dim)).copy_from(feats);
            off += view.dim();
        }
        Ok(Self {
            agg: SparseSym::from_triplets(total, trip)?,
            pool,
            x,
        })
    }
}

/// `student <- beta * student + (1 - beta) * teacher` on the student's names.
pub fn ema_update(student: &mut Params, teacher: &Params, beta: f64) -> Result<()> {
    for (name, s) in student.iter_mut() {
        let t = teacher
            .get(name)
            .ok_or_else(|| Error::Structure(format!("teacher lacks `{name}`")))?;
        if t.shape() != s.shape() {
            return Err(Error::Shape(format!("`{name}`: {:?} vs {:?}", s.shape(), t.shape())));
        }
        s.zip_apply(t, |a, b| *a = beta * *a + (1.0 - beta) * b);
    }
    Ok(())
}
