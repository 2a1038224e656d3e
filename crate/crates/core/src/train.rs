//! Adversarial bootstrapped training.
//!
//! Each epoch samples two augmented views, runs a few projected-gradient
//! ascent steps on a hidden-layer perturbation of the teacher while
//! accumulating the teacher's gradient of the bootstrap loss, then updates
//! the teacher and moves the student towards it by EMA.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::augment::{sample_views, AugmentationPlan};
use crate::autodiff::{Tape, Tensor, Var};
use crate::encoders::{
    encoder_forward, ema_update, gcn_forward, gin_forward, init_teacher, student_from_teacher, student_project,
    teacher_project, EncoderInput, EncoderKind, GraphBatch, ModelSpec, Params, PerturbSite, Perturbation,
};
use crate::error::{Error, Result};
use crate::graph::NormalizedLaplacian;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Optimizer {
    Adam,
    Sgd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub ema_decay: f64,
    /// l-infinity radius of the hidden perturbation.
    pub eps: f64,
    /// PGD step size; defaults to `eps`.
    pub pgd_step: Option<f64>,
    pub pgd_steps: usize,
    /// Epochs whose gradients are averaged into one teacher update.
    pub accum_steps: usize,
    pub optimizer: Optimizer,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub site: PerturbSite,
    /// Also score the swapped view pair and average the two losses.
    pub symmetric: bool,
    /// Draw fresh views every epoch instead of once.
    pub resample_views: bool,
    pub rho: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 5000,
            lr: 1e-5,
            weight_decay: 8e-4,
            ema_decay: 0.998,
            eps: 0.008,
            pgd_step: None,
            pgd_steps: 3,
            accum_steps: 2,
            optimizer: Optimizer::Adam,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            site: PerturbSite::FirstHidden,
            symmetric: false,
            resample_views: true,
            rho: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn alpha(&self) -> f64 {
        self.pgd_step.unwrap_or(self.eps)
    }

    pub fn validate(&self) -> Result<()> {
        let checks: [(&'static str, bool); 8] = [
            ("lr", self.lr >= 0.0 && self.lr.is_finite()),
            ("weight_decay", self.weight_decay >= 0.0),
            ("ema_decay", (0.0..=1.0).contains(&self.ema_decay)),
            ("eps", self.eps >= 0.0 && self.eps.is_finite()),
            ("pgd_step", self.alpha() >= 0.0),
            ("pgd_steps", self.pgd_steps >= 1),
            ("accum_steps", self.accum_steps >= 1),
            ("rho", self.rho > 0.0 && self.rho <= 1.0),
        ];
        for (name, ok) in checks {
            if !ok {
                return Err(Error::param(name, "out of range"));
            }
        }
        Ok(())
    }
}

/// One graph prepared for training: clean Laplacian, centrality, plan and
/// node features.
#[derive(Clone, Debug)]
pub struct GraphItem {
    pub lap: NormalizedLaplacian,
    pub centrality: Vec<f64>,
    pub plan: AugmentationPlan,
    pub features: Tensor,
}

/// Optimizer moments.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Params,
    pub v: Params,
    pub step: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub spec: ModelSpec,
    pub cfg: TrainConfig,
    /// Teacher parameters (receive gradients).
    pub teacher: Params,
    /// Student parameters (EMA of the teacher, never differentiated).
    pub student: Params,
    pub adam: AdamState,
    /// Running teacher gradient.
    pub accum_grad: Params,
    pub accum_count: usize,
    pub epoch: usize,
}

/// Per-epoch record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean bootstrap loss over the PGD steps.
    pub loss: f64,
    pub step_losses: Vec<f64>,
    pub delta_max_abs: f64,
    pub delta_norm: f64,
    /// Frobenius norm of this epoch's accumulated teacher gradient.
    pub grad_norm: f64,
    pub teacher_updated: bool,
}

/// Inner-step snapshot handed to an observer.
#[derive(Clone, Debug)]
pub struct InnerStep {
    pub epoch: usize,
    pub step: usize,
    pub loss: f64,
    pub delta_max_abs: f64,
}

/// `-2 * mean_i cos(t_i, z_i)` on the tape.
pub fn boot_loss_var(tape: &mut Tape<'_>, t_hat: Var, z_hat: Var) -> Result<Var> {
    let c = tape.cosine_rows(t_hat, z_hat)?;
    let m = tape.mean_all(c);
    Ok(tape.scale(m, -2.0))
}

/// Bootstrap loss value; a zero-norm row contributes similarity 0.
pub fn boot_loss(t_hat: &Tensor, z_hat: &Tensor) -> Result<f64> {
    let mut tape = Tape::new();
    let t = tape.constant(t_hat.clone());
    let z = tape.constant(z_hat.clone());
    let l = boot_loss_var(&mut tape, t, z)?;
    Ok(tape.value(l)[(0, 0)])
}

/// i.i.d. `U(-eps, eps)` entries.
pub fn init_perturbation(rows: usize, cols: usize, eps: f64, seed: u64) -> Tensor {
    if eps <= 0.0 {
        return Tensor::zeros(rows, cols);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(rows, cols, |_, _| rng.random_range(-eps..=eps))
}

/// `clip(delta + alpha * g / ||g||_F, -eps, eps)`; unchanged for `g = 0`
/// or `eps = 0`.
pub fn pgd_update(delta: &Tensor, grad: &Tensor, alpha: f64, eps: f64) -> Result<Tensor> {
    if delta.shape() != grad.shape() {
        return Err(Error::Shape(format!("delta {:?} vs gradient {:?}", delta.shape(), grad.shape())));
    }
    let norm = grad.norm();
    if norm == 0.0 || eps == 0.0 || !norm.is_finite() {
        return Ok(delta.clone());
    }
    let scale = alpha / norm;
    Ok(delta.zip_map(grad, |d, g| (d + scale * g).clamp(-eps, eps)))
}

/// `buffer += grad / t_pgd` for every parameter.
pub fn accumulate_grad(buffer: &mut Params, grad: &Params, t_pgd: usize) -> Result<()> {
    let w = 1.0 / t_pgd.max(1) as f64;
    for (name, b) in buffer.iter_mut() {
        let g = grad
            .get(name)
            .ok_or_else(|| Error::Structure(format!("gradient lacks `{name}`")))?;
        if g.shape() != b.shape() {
            return Err(Error::Shape(format!("`{name}`: {:?} vs {:?}", b.shape(), g.shape())));
        }
        b.zip_apply(g, |a, x| *a += w * x);
    }
    Ok(())
}

/// Derives a stream seed from a base seed and two counters.
pub fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ b.wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl TrainState {
    pub fn new(spec: ModelSpec, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let teacher = init_teacher(&spec, cfg.seed)?;
        let student = student_from_teacher(&teacher);
        let zeros = teacher.zeros_like();
        Ok(Self {
            spec,
            adam: AdamState {
                m: zeros.clone(),
                v: zeros.clone(),
                step: 0,
            },
            accum_grad: zeros,
            accum_count: 0,
            teacher,
            student,
            cfg,
            epoch: 0,
        })
    }

    /// Adds one epoch's teacher gradient to the accumulation buffer.
    pub fn accumulate_teacher_grad(&mut self, grad: &Params) -> Result<()> {
        accumulate_grad(&mut self.accum_grad, grad, self.cfg.pgd_steps)
    }

    /// Applies the averaged buffer with weight decay, then clears it.
    pub fn teacher_step(&mut self) -> Result<()> {
        let scale = 1.0 / self.accum_count.max(1) as f64;
        let cfg = &self.cfg;
        if cfg.optimizer == Optimizer::Adam {
            self.adam.step += 1;
        }
        let t = self.adam.step as i32;
        for (name, p) in self.teacher.iter_mut() {
            let g = self.accum_grad.get(name).expect("buffer shares the layout");
            let grad = g * scale + &*p * cfg.weight_decay;
            match cfg.optimizer {
                Optimizer::Sgd => *p -= grad * cfg.lr,
                Optimizer::Adam => {
                    let m = self.adam.m.get_mut(name).expect("moment layout");
                    m.zip_apply(&grad, |a, g| *a = cfg.adam_beta1 * *a + (1.0 - cfg.adam_beta1) * g);
                    let v = self.adam.v.get_mut(name).expect("moment layout");
                    v.zip_apply(&grad, |a, g| *a = cfg.adam_beta2 * *a + (1.0 - cfg.adam_beta2) * g * g);
                    let bc1 = 1.0 - cfg.adam_beta1.powi(t);
                    let bc2 = 1.0 - cfg.adam_beta2.powi(t);
                    let (m, v) = (self.adam.m.get(name).unwrap(), self.adam.v.get(name).unwrap());
                    for ((x, &mi), &vi) in p.iter_mut().zip(m.iter()).zip(v.iter()) {
                        *x -= cfg.lr * (mi / bc1) / ((vi / bc2).sqrt() + cfg.adam_eps);
                    }
                }
            }
        }
        for (_, b) in self.accum_grad.iter_mut() {
            b.fill(0.0);
        }
        self.accum_count = 0;
        Ok(())
    }

    pub fn ema_step(&mut self) -> Result<()> {
        ema_update(&mut self.student, &self.teacher, self.cfg.ema_decay)
    }

    /// Runs one epoch. On error the state is left as it was before the call.
    pub fn train_epoch(&mut self, data: &[GraphItem]) -> Result<EpochMetrics> {
        self.train_epoch_observed(data, |_| {})
    }

    pub fn train_epoch_observed<F>(&mut self, data: &[GraphItem], mut observer: F) -> Result<EpochMetrics>
    where
        F: FnMut(&InnerStep),
    {
        if data.is_empty() {
            return Err(Error::Structure("no training graphs".into()));
        }
        if self.spec.kind == EncoderKind::Gcn && data.len() != 1 {
            return Err(Error::Structure("GCN training takes exactly one graph".into()));
        }
        let cfg = self.cfg.clone();
        let epoch = self.epoch;
        let view_epoch = if cfg.resample_views { epoch as u64 } else { 0 };

        let mut view1 = Vec::with_capacity(data.len());
        let mut view2 = Vec::with_capacity(data.len());
        for (gi, item) in data.iter().enumerate() {
            let v = sample_views(&item.lap, &item.centrality, &item.plan, mix_seed(cfg.seed, 1 + view_epoch, gi as u64), cfg.rho)?;
            view1.push(v.view1);
            view2.push(v.view2);
        }
        let inputs1 = PreparedInput::new(&self.spec, &view1, data)?;
        let inputs2 = PreparedInput::new(&self.spec, &view2, data)?;

        let z_hat = student_output(&self.spec, &self.student, &inputs2)?;
        let z_swap = if cfg.symmetric { Some(student_output(&self.spec, &self.student, &inputs1)?) } else { None };

        let layer = match cfg.site {
            PerturbSite::FirstHidden => 0,
            PerturbSite::LastHidden => self.spec.hidden.len() - 1,
        };
        let rows = inputs1.rows();
        let mut delta = init_perturbation(rows, self.spec.hidden[layer], cfg.eps, mix_seed(cfg.seed, 2, epoch as u64));
        let mut epoch_grad = self.teacher.zeros_like();
        let mut step_losses = Vec::with_capacity(cfg.pgd_steps);

        for step in 0..cfg.pgd_steps {
            let (mut loss, mut g_params, mut g_delta) =
                teacher_loss_grad(&self.spec, &self.teacher, &inputs1, &z_hat, &delta, cfg.site)?;
            if let Some(z2) = &z_swap {
                let (l2, gp2, gd2) = teacher_loss_grad(&self.spec, &self.teacher, &inputs2, z2, &delta, cfg.site)?;
                loss = 0.5 * (loss + l2);
                for (name, g) in g_params.iter_mut() {
                    *g = (&*g + gp2.get(name).expect("same layout")) * 0.5;
                }
                g_delta = (g_delta + gd2) * 0.5;
            }
            if !loss.is_finite() {
                return Err(Error::NonFinite { epoch, step, loss });
            }
            accumulate_grad(&mut epoch_grad, &g_params, cfg.pgd_steps)?;
            delta = pgd_update(&delta, &g_delta, cfg.alpha(), cfg.eps)?;
            let delta_max_abs = delta.amax();
            assert!(delta_max_abs <= cfg.eps, "perturbation left the eps-ball");
            step_losses.push(loss);
            observer(&InnerStep {
                epoch,
                step,
                loss,
                delta_max_abs,
            });
        }

        let grad_norm = epoch_grad.sq_norm().sqrt();
        for (name, b) in self.accum_grad.iter_mut() {
            *b += epoch_grad.get(name).expect("same layout");
        }
        self.accum_count += 1;
        let teacher_updated = self.accum_count >= cfg.accum_steps;
        if teacher_updated {
            self.teacher_step()?;
            self.ema_step()?;
        }
        self.epoch += 1;
        Ok(EpochMetrics {
            epoch,
            loss: step_losses.iter().sum::<f64>() / step_losses.len() as f64,
            step_losses,
            delta_max_abs: delta.amax(),
            delta_norm: delta.norm(),
            grad_norm,
            teacher_updated,
        })
    }

    /// Trains for `cfg.epochs - epoch` more epochs.
    pub fn fit<F>(&mut self, data: &[GraphItem], mut on_epoch: F) -> Result<Vec<EpochMetrics>>
    where
        F: FnMut(&TrainState, &EpochMetrics) -> Result<()>,
    {
        let mut out = Vec::new();
        while self.epoch < self.cfg.epochs {
            let m = self.train_epoch(data)?;
            on_epoch(self, &m)?;
            out.push(m);
        }
        Ok(out)
    }

    /// Student encoder embeddings on the clean graphs.
    pub fn embed(&self, data: &[GraphItem]) -> Result<Tensor> {
        embed(&self.spec, &self.student, data)
    }
}

/// Encoder embeddings of `params` on clean graphs: node rows for GCN, one
/// pooled row per graph for GIN.
pub fn embed(spec: &ModelSpec, params: &Params, data: &[GraphItem]) -> Result<Tensor> {
    match spec.kind {
        EncoderKind::Gcn => {
            let item = data.first().ok_or_else(|| Error::Structure("no graph".into()))?;
            gcn_forward(&item.lap, &item.features, spec, params)
        }
        EncoderKind::Gin => {
            let views: Vec<(&NormalizedLaplacian, &Tensor)> = data.iter().map(|d| (&d.lap, &d.features)).collect();
            gin_forward(&views, spec, params)
        }
    }
}

/// Encoder input with owned propagation structures.
enum PreparedInput {
    Nodes { prop: crate::graph::SparseSym, x: Tensor },
    Graphs(GraphBatch),
}

impl PreparedInput {
    fn new(spec: &ModelSpec, views: &[NormalizedLaplacian], data: &[GraphItem]) -> Result<Self> {
        Ok(match spec.kind {
            EncoderKind::Gcn => Self::Nodes {
                prop: views[0].propagation(),
                x: data[0].features.clone(),
            },
            EncoderKind::Gin => {
                let pairs: Vec<(&NormalizedLaplacian, &Tensor)> =
                    views.iter().zip(data).map(|(v, d)| (v, &d.features)).collect();
                Self::Graphs(GraphBatch::from_views(&pairs, spec)?)
            }
        })
    }

    fn rows(&self) -> usize {
        match self {
            Self::Nodes { x, .. } => x.nrows(),
            Self::Graphs(b) => b.x.nrows(),
        }
    }

    fn bind<'a>(&'a self, tape: &mut Tape<'a>) -> EncoderInput<'a> {
        match self {
            Self::Nodes { prop, x } => EncoderInput::Nodes {
                prop,
                x: tape.constant(x.clone()),
            },
            Self::Graphs(b) => EncoderInput::Graphs {
                agg: &b.agg,
                pool: tape.constant(b.pool.clone()),
                x: tape.constant(b.x.clone()),
            },
        }
    }
}

fn student_output(spec: &ModelSpec, student: &Params, input: &PreparedInput) -> Result<Tensor> {
    let mut tape = Tape::new();
    let bound = student.bind(&mut tape, false);
    let enc_in = input.bind(&mut tape);
    let h = encoder_forward(&mut tape, spec, &bound, &enc_in, None)?;
    let z = student_project(&mut tape, &bound, h)?;
    Ok(tape.value(z).clone())
}

fn teacher_loss_grad(
    spec: &ModelSpec,
    teacher: &Params,
    input: &PreparedInput,
    z_hat: &Tensor,
    delta: &Tensor,
    site: PerturbSite,
) -> Result<(f64, Params, Tensor)> {
    let mut tape = Tape::new();
    let bound = teacher.bind(&mut tape, true);
    let enc_in = input.bind(&mut tape);
    let d = tape.param(delta.clone());
    let h = encoder_forward(&mut tape, spec, &bound, &enc_in, Some(Perturbation { site, delta: d }))?;
    let t_hat = teacher_project(&mut tape, &bound, h)?;
    let z = tape.constant(z_hat.clone());
    let loss = boot_loss_var(&mut tape, t_hat, z)?;
    let mut grads = tape.backward(loss)?;
    let mut g_params = Params::new();
    for (name, var) in bound.iter() {
        g_params.insert(name.clone(), grads.take(*var).expect("teacher leaf gradient"));
    }
    let g_delta = grads.take(d).expect("perturbation gradient");
    Ok((tape.value(loss)[(0, 0)], g_params, g_delta))
}

const CKPT_MAGIC: &[u8; 8] = b"LGNNCKPT";
const CKPT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    spec: ModelSpec,
    cfg: TrainConfig,
}

/// SHA-256 of the model and training configuration.
pub fn config_hash(spec: &ModelSpec, cfg: &TrainConfig) -> [u8; 32] {
    let json = serde_json::to_vec(&CheckpointMeta {
        spec: spec.clone(),
        cfg: cfg.clone(),
    })
    .expect("config serializes");
    Sha256::digest(&json).into()
}

fn write_params<W: Write>(w: &mut W, group: u8, p: &Params) -> std::io::Result<()> {
    w.write_all(&(p.len() as u32).to_le_bytes())?;
    for (name, t) in p.iter() {
        w.write_all(&[group])?;
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.nrows() as u64).to_le_bytes())?;
        w.write_all(&(t.ncols() as u64).to_le_bytes())?;
        for i in 0..t.nrows() {
            for j in 0..t.ncols() {
                w.write_all(&t[(i, j)].to_le_bytes())?;
            }
        }
    }
    Ok(())
}

struct ByteReader<R> {
    r: R,
}

impl<R: Read> ByteReader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.r.read_exact(&mut b).map_err(|e| ckpt_err(format!("truncated checkpoint: {e}")))?;
        Ok(b)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    fn vec(&mut self, len: usize) -> Result<Vec<u8>> {
        if len > 1 << 30 {
            return Err(ckpt_err(format!("implausible length {len}")));
        }
        let mut v = vec![0u8; len];
        self.r.read_exact(&mut v).map_err(|e| ckpt_err(format!("truncated checkpoint: {e}")))?;
        Ok(v)
    }

    fn params(&mut self, group: u8) -> Result<Params> {
        let count = self.u32()?;
        let mut p = Params::new();
        for _ in 0..count {
            let [g] = self.bytes::<1>()?;
            if g != group {
                return Err(ckpt_err(format!("tensor group {g}, expected {group}")));
            }
            let len = self.u32()? as usize;
            let name = String::from_utf8(self.vec(len)?).map_err(|_| ckpt_err("tensor name is not UTF-8".into()))?;
            let rows = self.u64()? as usize;
            let cols = self.u64()? as usize;
            let raw = self.vec(rows.checked_mul(cols).and_then(|x| x.checked_mul(8)).ok_or_else(|| ckpt_err("tensor too large".into()))?)?;
            let vals: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            p.insert(name, Tensor::from_row_slice(rows, cols, &vals));
        }
        Ok(p)
    }
}

fn ckpt_err(msg: String) -> Error {
    Error::Parse {
        path: "<checkpoint>".into(),
        line: 0,
        msg,
    }
}

impl TrainState {
    /// Binary checkpoint: magic, version, config hash, config JSON,
    /// counters, then named row-major little-endian tensors.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        let meta = serde_json::to_vec(&CheckpointMeta {
            spec: self.spec.clone(),
            cfg: self.cfg.clone(),
        })
        .map_err(|e| Error::Config {
            key: "checkpoint".into(),
            msg: e.to_string(),
        })?;
        w.write_all(CKPT_MAGIC)?;
        w.write_all(&CKPT_VERSION.to_le_bytes())?;
        w.write_all(&config_hash(&self.spec, &self.cfg))?;
        w.write_all(&(meta.len() as u32).to_le_bytes())?;
        w.write_all(&meta)?;
        w.write_all(&(self.epoch as u64).to_le_bytes())?;
        w.write_all(&self.adam.step.to_le_bytes())?;
        w.write_all(&(self.accum_count as u64).to_le_bytes())?;
        for (group, p) in [
            (0u8, &self.teacher),
            (1, &self.student),
            (2, &self.adam.m),
            (3, &self.adam.v),
            (4, &self.accum_grad),
        ] {
            write_params(&mut w, group, p)?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(r: R) -> Result<Self> {
        let mut br = ByteReader { r };
        let magic: [u8; 8] = br.bytes()?;
        if &magic != CKPT_MAGIC {
            return Err(ckpt_err("not a checkpoint file".into()));
        }
        let version = br.u32()?;
        if version != CKPT_VERSION {
            return Err(ckpt_err(format!("unsupported checkpoint version {version}")));
        }
        let hash: [u8; 32] = br.bytes()?;
        let len = br.u32()? as usize;
        let meta: CheckpointMeta =
            serde_json::from_slice(&br.vec(len)?).map_err(|e| ckpt_err(format!("bad config block: {e}")))?;
        if config_hash(&meta.spec, &meta.cfg) != hash {
            return Err(ckpt_err("config hash mismatch".into()));
        }
        let epoch = br.u64()? as usize;
        let step = br.u64()?;
        let accum_count = br.u64()? as usize;
        let teacher = br.params(0)?;
        let student = br.params(1)?;
        let m = br.params(2)?;
        let v = br.params(3)?;
        let accum_grad = br.params(4)?;
        let state = Self {
            spec: meta.spec,
            cfg: meta.cfg,
            teacher,
            student,
            adam: AdamState { m, v, step },
            accum_grad,
            accum_count,
            epoch,
        };
        let expected = init_teacher(&state.spec, 0)?;
        if !state.teacher.same_layout(&expected) || !state.student.same_layout(&student_from_teacher(&expected)) {
            return Err(ckpt_err("parameter layout does not match the model spec".into()));
        }
        Ok(state)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_checkpoint(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::read_checkpoint(&bytes[..]).map_err(|e| match e {
            Error::Parse { line, msg, .. } => Error::Parse {
                path: path.display().to_string(),
                line,
                msg,
            },
            other => other,
        })
    }
}
