//! Centrality-guided max/min spectral augmentation.
//!
//! Two augmentation matrices start from `c c^T` on the lower triangle. The
//! first is pushed by projected gradient ascent to move the extremal spectrum
//! of the modified Laplacian away from the original, the second by projected
//! descent to keep it close. Views are then drawn as Bernoulli samples of
//! each matrix.

use std::collections::BinaryHeap;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NormalizedLaplacian};
use crate::pairs::PairMatrix;
use crate::spectral::{self, Objective, SpectralSummary};

/// Above this node count the support is restricted and pairs are subsampled.
pub const SUBSAMPLE_THRESHOLD: usize = 2000;

const PLAN_MAGIC: &str = "laplacegnn-plan";
const PLAN_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    /// Budget ratio `r`; budget is `r * |E|`.
    pub budget_ratio: f64,
    /// Base step size.
    pub step: f64,
    pub iterations: usize,
    /// Extremal eigenvalues taken from each end of the spectrum.
    pub k: usize,
    /// Use `step / sqrt(t)` at iteration `t`.
    pub decay: bool,
    pub objective: Objective,
    /// Node-pair sampling ratio for large graphs.
    pub rho: f64,
    pub eigen_tol: f64,
    pub eigen_max_iter: usize,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            budget_ratio: 0.5,
            step: 10.0,
            iterations: 50,
            k: 100,
            decay: true,
            objective: Objective::SpectralDistance,
            rho: 1.0,
            eigen_tol: 1e-8,
            eigen_max_iter: 20_000,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.budget_ratio > 0.0 && self.budget_ratio <= 1.0) {
            return Err(Error::param("budget_ratio", format!("{} not in (0, 1]", self.budget_ratio)));
        }
        if !(self.step >= 0.0) || !self.step.is_finite() {
            return Err(Error::param("step", "must be finite and non-negative"));
        }
        if self.k == 0 {
            return Err(Error::param("k", "must be at least 1"));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::param("rho", format!("{} not in (0, 1]", self.rho)));
        }
        if !(self.eigen_tol > 0.0) {
            return Err(Error::param("eigen_tol", "must be positive"));
        }
        Ok(())
    }
}

/// Optimized max-view and min-view augmentation matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentationPlan {
    pub n: usize,
    pub delta_max: PairMatrix,
    pub delta_min: PairMatrix,
    pub budget: f64,
    pub budget_ratio: f64,
    pub iterations: usize,
    pub step: f64,
    /// Effective number of eigenvalues per end (clamped to `n / 2`).
    pub k: usize,
    /// Spectral objective of the max view before each update.
    pub history_max: Vec<f64>,
    /// Spectral objective of the min view before each update.
    pub history_min: Vec<f64>,
    pub final_loss_max: f64,
    pub final_loss_min: f64,
}

/// Two sampled views of one graph.
#[derive(Clone, Debug)]
pub struct AugmentedViews {
    pub view1: NormalizedLaplacian,
    pub view2: NormalizedLaplacian,
    pub sample_seed: u64,
    /// Pairs drawn as 1 for each view.
    pub sampled_pairs: (usize, usize),
}

/// `B = r * |E|` (the adjacency sum counts every undirected edge twice).
pub fn compute_budget(g: &Graph, r: f64) -> f64 {
    budget_from_edges(g.n_edges(), r)
}

pub fn budget_from_edges(n_edges: usize, r: f64) -> f64 {
    r * n_edges as f64
}

/// Number of undirected edges behind a normalized Laplacian.
pub fn laplacian_edge_count(lap: &NormalizedLaplacian) -> usize {
    lap.matrix
        .entries()
        .iter()
        .filter(|&&(r, c, v)| r != c && v != 0.0)
        .count()
}

/// `delta_ij = c_i c_j` on every lower-triangular pair.
pub fn init_deltas(c: &[f64]) -> (PairMatrix, PairMatrix) {
    let support = PairMatrix::full(c.len());
    let d = init_on_support(&support, c);
    (d.clone(), d)
}

pub fn init_on_support(support: &PairMatrix, c: &[f64]) -> PairMatrix {
    let values = support.iter().map(|(i, j, _)| c[i] * c[j]).collect();
    support.with_values(values)
}

/// Clip to `[0, 1]`, then scale down uniformly if the total exceeds `budget`.
pub fn project_box_budget(delta: &PairMatrix, budget: f64) -> PairMatrix {
    let mut out = delta.clone();
    project_in_place(&mut out, budget);
    out
}

pub fn project_in_place(delta: &mut PairMatrix, budget: f64) {
    let budget = if budget.is_finite() { budget.max(0.0) } else { 0.0 };
    let vals = delta.values_mut();
    let mut total = 0.0;
    for v in vals.iter_mut() {
        *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        total += *v;
    }
    if total > budget {
        let scale = budget / total;
        vals.iter_mut().for_each(|v| *v *= scale);
    }
}

/// Support for the augmentation matrices.
///
/// All lower-triangular pairs up to [`SUBSAMPLE_THRESHOLD`] nodes; beyond
/// that, existing edges plus the top `rho` fraction of non-edges ranked by
/// `c_i c_j`.
pub fn augmentation_support(lap: &NormalizedLaplacian, c: &[f64], rho: f64) -> Result<PairMatrix> {
    let n = lap.dim();
    if n <= SUBSAMPLE_THRESHOLD {
        return Ok(PairMatrix::full(n));
    }
    let edges: Vec<(usize, usize)> = lap
        .matrix
        .entries()
        .iter()
        .filter(|&&(r, c, v)| r != c && v != 0.0)
        .map(|&(r, c, _)| (r, c))
        .collect();
    let non_edges = n * (n - 1) / 2 - edges.len();
    let want = ((rho * non_edges as f64).round() as usize).min(non_edges);
    let edge_set: std::collections::HashSet<(usize, usize)> = edges.iter().copied().collect();

    // largest products c_a c_b over pairs, in decreasing order
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| c[b].total_cmp(&c[a]).then(a.cmp(&b)));
    #[derive(PartialEq)]
    struct Item(f64, usize, usize);
    impl Eq for Item {}
    impl PartialOrd for Item {
        fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(o))
        }
    }
    impl Ord for Item {
        fn cmp(&self, o: &Self) -> std::cmp::Ordering {
            self.0
                .total_cmp(&o.0)
                .then_with(|| o.1.cmp(&self.1))
                .then_with(|| o.2.cmp(&self.2))
        }
    }
    let mut heap: BinaryHeap<Item> = (1..n).map(|i| Item(c[order[i]] * c[order[0]], i, 0)).collect();
    let mut chosen = Vec::with_capacity(want);
    while chosen.len() < want {
        let Some(Item(_, i, j)) = heap.pop() else { break };
        let (a, b) = (order[i].max(order[j]), order[i].min(order[j]));
        if !edge_set.contains(&(a, b)) {
            chosen.push((a, b));
        }
        if j + 1 < i {
            heap.push(Item(c[order[i]] * c[order[j + 1]], i, j + 1));
        }
    }
    PairMatrix::with_support(n, edges.into_iter().chain(chosen))
}

/// Per-iteration snapshot handed to an observer.
pub struct IterationReport<'a> {
    pub iteration: usize,
    pub step: f64,
    pub loss_max: f64,
    pub loss_min: f64,
    pub budget: f64,
    pub delta_max: &'a PairMatrix,
    pub delta_min: &'a PairMatrix,
}

/// Runs the max/min optimization for `cfg.iterations` steps.
pub fn optimize_views(lap: &NormalizedLaplacian, c: &[f64], cfg: &AugmentConfig) -> Result<AugmentationPlan> {
    optimize_views_observed(lap, c, cfg, |_| {})
}

/// [`optimize_views`] calling `observer` after every iteration.
pub fn optimize_views_observed<F>(
    lap: &NormalizedLaplacian,
    c: &[f64],
    cfg: &AugmentConfig,
    mut observer: F,
) -> Result<AugmentationPlan>
where
    F: FnMut(&IterationReport<'_>),
{
    cfg.validate()?;
    let n = lap.dim();
    if c.len() != n {
        return Err(Error::Shape(format!("centrality has {} entries, graph has {n} nodes", c.len())));
    }
    let budget = budget_from_edges(laplacian_edge_count(lap), cfg.budget_ratio);
    let support = augmentation_support(lap, c, cfg.rho)?;
    let mut delta_max = init_on_support(&support, c);
    project_in_place(&mut delta_max, budget);
    let mut delta_min = delta_max.clone();
    let k = cfg.k.min(n / 2);

    let mut history_max = Vec::with_capacity(cfg.iterations);
    let mut history_min = Vec::with_capacity(cfg.iterations);
    let fail = |iteration: usize| move |e: Error| Error::Augment {
        iteration,
        source: Box::new(e),
    };

    if k == 0 {
        return Ok(AugmentationPlan {
            n,
            delta_max,
            delta_min,
            budget,
            budget_ratio: cfg.budget_ratio,
            iterations: 0,
            step: cfg.step,
            k,
            history_max,
            history_min,
            final_loss_max: 0.0,
            final_loss_min: 0.0,
        });
    }

    let eig = |m: &crate::graph::SparseSym, salt: u64| {
        spectral::extremal_eigs_seeded(m, k, cfg.eigen_tol, cfg.eigen_max_iter, cfg.seed ^ salt)
    };
    let orig = eig(&lap.matrix, 0).map_err(fail(0))?;

    for t in 1..=cfg.iterations {
        let step = if cfg.decay { cfg.step / (t as f64).sqrt() } else { cfg.step };

        let (loss_max, grad) = objective_and_grad(lap, c, &delta_max, &orig, cfg.objective, |m| eig(m, 2 * t as u64))
            .map_err(fail(t))?;
        for (d, g) in delta_max.values_mut().iter_mut().zip(grad.values()) {
            *d += step * g;
        }
        project_in_place(&mut delta_max, budget);

        let (loss_min, grad) =
            objective_and_grad(lap, c, &delta_min, &orig, cfg.objective, |m| eig(m, 2 * t as u64 + 1))
                .map_err(fail(t))?;
        for (d, g) in delta_min.values_mut().iter_mut().zip(grad.values()) {
            *d -= step * g;
        }
        project_in_place(&mut delta_min, budget);

        history_max.push(loss_max);
        history_min.push(loss_min);
        observer(&IterationReport {
            iteration: t,
            step,
            loss_max,
            loss_min,
            budget,
            delta_max: &delta_max,
            delta_min: &delta_min,
        });
    }

    let last = cfg.iterations + 1;
    let final_loss_max = view_objective(lap, c, &delta_max, &orig, cfg.objective, |m| eig(m, 2 * last as u64))
        .map_err(fail(last))?;
    let final_loss_min = view_objective(lap, c, &delta_min, &orig, cfg.objective, |m| eig(m, 2 * last as u64 + 1))
        .map_err(fail(last))?;

    Ok(AugmentationPlan {
        n,
        delta_max,
        delta_min,
        budget,
        budget_ratio: cfg.budget_ratio,
        iterations: cfg.iterations,
        step: cfg.step,
        k,
        history_max,
        history_min,
        final_loss_max,
        final_loss_min,
    })
}

fn objective_and_grad<E>(
    lap: &NormalizedLaplacian,
    c: &[f64],
    delta: &PairMatrix,
    orig: &SpectralSummary,
    objective: Objective,
    eig: E,
) -> Result<(f64, PairMatrix)>
where
    E: Fn(&crate::graph::SparseSym) -> Result<SpectralSummary>,
{
    let m = spectral::build_modified_laplacian(lap, c, delta)?;
    let summary = eig(&m)?;
    let loss = spectral::objective_value(orig, &summary, objective)?;
    let g = spectral::objective_grad(lap, c, delta, &summary, orig, objective)?;
    if g.degenerate_clusters > 0 {
        log::debug!("{} degenerate eigenvalue clusters averaged", g.degenerate_clusters);
    }
    Ok((loss, g.grad))
}

/// Spectral objective of the view built from `delta`.
pub fn view_objective<E>(
    lap: &NormalizedLaplacian,
    c: &[f64],
    delta: &PairMatrix,
    orig: &SpectralSummary,
    objective: Objective,
    eig: E,
) -> Result<f64>
where
    E: Fn(&crate::graph::SparseSym) -> Result<SpectralSummary>,
{
    let m = spectral::build_modified_laplacian(lap, c, delta)?;
    spectral::objective_value(orig, &eig(&m)?, objective)
}

/// Bernoulli sample of an augmentation matrix.
///
/// Pairs with zero probability consume no randomness, so a plan restored
/// from its sparse file form samples identically. Above
/// [`SUBSAMPLE_THRESHOLD`] nodes each candidate pair is first kept with
/// probability `rho`.
pub fn bernoulli_sample(delta: &PairMatrix, rho: f64, rng: &mut ChaCha8Rng) -> PairMatrix {
    let subsample = delta.n() > SUBSAMPLE_THRESHOLD && rho < 1.0;
    let values = delta
        .values()
        .iter()
        .map(|&p| {
            if p <= 0.0 {
                return 0.0;
            }
            if subsample && rng.random::<f64>() >= rho {
                return 0.0;
            }
            if rng.random::<f64>() < p {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    delta.with_values(values)
}

/// Draws binary samples of both plan matrices and builds the two views.
pub fn sample_views(
    lap: &NormalizedLaplacian,
    c: &[f64],
    plan: &AugmentationPlan,
    seed: u64,
    rho: f64,
) -> Result<AugmentedViews> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::param("rho", format!("{rho} not in (0, 1]")));
    }
    if plan.n != lap.dim() {
        return Err(Error::Shape(format!("plan for {} nodes, graph has {}", plan.n, lap.dim())));
    }
    let mut rng1 = ChaCha8Rng::seed_from_u64(seed);
    let mut rng2 = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_7e77);
    let p1 = bernoulli_sample(&plan.delta_max, rho, &mut rng1);
    let p2 = bernoulli_sample(&plan.delta_min, rho, &mut rng2);
    let count = |p: &PairMatrix| p.values().iter().filter(|&&v| v != 0.0).count();
    let sampled_pairs = (count(&p1), count(&p2));
    let view = |p: &PairMatrix| -> Result<NormalizedLaplacian> {
        Ok(NormalizedLaplacian {
            matrix: spectral::build_modified_laplacian(lap, c, p)?,
            degree_root_inv: lap.degree_root_inv.clone(),
        })
    };
    Ok(AugmentedViews {
        view1: view(&p1)?,
        view2: view(&p2)?,
        sample_seed: seed,
        sampled_pairs,
    })
}

impl AugmentationPlan {
    /// Text form: header, scalars, then `i j value` triplets per matrix.
    /// Floats use shortest round-trip formatting, so reading back is exact.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{PLAN_MAGIC} v{PLAN_VERSION}")?;
        writeln!(w, "n {}", self.n)?;
        writeln!(w, "budget_ratio {:?}", self.budget_ratio)?;
        writeln!(w, "budget {:?}", self.budget)?;
        writeln!(w, "iterations {}", self.iterations)?;
        writeln!(w, "step {:?}", self.step)?;
        writeln!(w, "k {}", self.k)?;
        writeln!(w, "final_loss_max {:?}", self.final_loss_max)?;
        writeln!(w, "final_loss_min {:?}", self.final_loss_min)?;
        write_floats(&mut w, "history_max", &self.history_max)?;
        write_floats(&mut w, "history_min", &self.history_min)?;
        let full = self.delta_max.len() == self.n * self.n.saturating_sub(1) / 2;
        writeln!(w, "support {}", if full { "full" } else { "explicit" })?;
        for (name, m) in [("delta_max", &self.delta_max), ("delta_min", &self.delta_min)] {
            let rows: Vec<(usize, usize, f64)> = if full { m.nonzeros() } else { m.iter().collect() };
            writeln!(w, "{name} {}", rows.len())?;
            for (i, j, v) in rows {
                writeln!(w, "{i} {j} {v:?}")?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R, path: &str) -> Result<Self> {
        let mut lines = Vec::new();
        for (i, l) in r.lines().enumerate() {
            lines.push((i + 1, l?));
        }
        let mut cur = PlanReader { lines, pos: 0, path };
        let (no, header) = cur.next("header")?;
        if header.trim() != format!("{PLAN_MAGIC} v{PLAN_VERSION}") {
            return Err(cur.err(no, format!("unsupported plan header `{header}`")));
        }
        let n: usize = cur.num("n")?;
        let budget_ratio: f64 = cur.num("budget_ratio")?;
        let budget: f64 = cur.num("budget")?;
        let iterations: usize = cur.num("iterations")?;
        let step: f64 = cur.num("step")?;
        let k: usize = cur.num("k")?;
        let final_loss_max: f64 = cur.num("final_loss_max")?;
        let final_loss_min: f64 = cur.num("final_loss_min")?;
        let history_max = cur.floats("history_max")?;
        let history_min = cur.floats("history_min")?;
        let (sno, support) = cur.field("support")?;
        let full = match support.as_str() {
            "full" => true,
            "explicit" => false,
            other => return Err(cur.err(sno, format!("unknown support `{other}`"))),
        };
        let delta_max = cur.matrix("delta_max", n, full)?;
        let delta_min = cur.matrix("delta_min", n, full)?;
        Ok(Self {
            n,
            delta_max,
            delta_min,
            budget,
            budget_ratio,
            iterations,
            step,
            k,
            history_max,
            history_min,
            final_loss_max,
            final_loss_min,
        })
    }
}

struct PlanReader<'p> {
    lines: Vec<(usize, String)>,
    pos: usize,
    path: &'p str,
}

impl PlanReader<'_> {
    fn err(&self, line: usize, msg: String) -> Error {
        Error::Parse {
            path: self.path.into(),
            line,
            msg,
        }
    }

    fn next(&mut self, what: &str) -> Result<(usize, String)> {
        let Some(l) = self.lines.get(self.pos).cloned() else {
            return Err(self.err(self.lines.len(), format!("unexpected end of file, expected {what}")));
        };
        self.pos += 1;
        Ok(l)
    }

    fn field(&mut self, key: &str) -> Result<(usize, String)> {
        let (no, l) = self.next(key)?;
        match l.split_once(' ') {
            Some((k, rest)) if k == key => Ok((no, rest.trim().to_string())),
            None if l.trim() == key => Ok((no, String::new())),
            _ => Err(self.err(no, format!("expected `{key}`"))),
        }
    }

    fn num<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (no, v) = self.field(key)?;
        v.parse().map_err(|_| self.err(no, format!("bad number `{v}`")))
    }

    fn floats(&mut self, key: &str) -> Result<Vec<f64>> {
        let (no, v) = self.field(key)?;
        v.split_whitespace()
            .map(|t| t.parse().map_err(|_| self.err(no, format!("bad number `{t}`"))))
            .collect()
    }

    fn matrix(&mut self, name: &str, n: usize, full: bool) -> Result<PairMatrix> {
        let count: usize = self.num(name)?;
        let mut trip = Vec::with_capacity(count);
        for _ in 0..count {
            let (no, l) = self.next("triplet")?;
            let t: Vec<&str> = l.split_whitespace().collect();
            let parsed = match t.as_slice() {
                [i, j, v] => i.parse().ok().zip(j.parse().ok()).zip(v.parse::<f64>().ok()),
                _ => None,
            };
            let ((i, j), v): ((usize, usize), f64) =
                parsed.ok_or_else(|| self.err(no, format!("bad triplet `{l}`")))?;
            if i <= j || i >= n {
                return Err(self.err(no, format!("pair ({i}, {j}) invalid for {n} nodes")));
            }
            trip.push((i, j, v));
        }
        if full {
            let mut m = PairMatrix::full(n);
            for (i, j, v) in trip {
                let idx = m.index_of(i, j).expect("full support");
                m.values_mut()[idx] = v;
            }
            Ok(m)
        } else {
            PairMatrix::from_triplets(n, &trip)
        }
    }
}

fn write_floats<W: Write>(w: &mut W, key: &str, vals: &[f64]) -> Result<()> {
    write!(w, "{key}")?;
    for v in vals {
        write!(w, " {v:?}")?;
    }
    writeln!(w)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_adjacency, normalized_laplacian};

    fn lap(g: &Graph) -> NormalizedLaplacian {
        normalized_laplacian(&build_adjacency(g))
    }

    #[test]
    fn init_examples() {
        let (d1, d2) = init_deltas(&[1.0, 1.0]);
        assert_eq!(d1.get(1, 0), 1.0);
        assert_eq!(d1, d2);
        let (z, _) = init_deltas(&[0.0, 0.0, 0.0]);
        assert!(z.values().iter().all(|&v| v == 0.0));
        let (d, _) = init_deltas(&[0.5, 1.0, 0.0]);
        assert_eq!(d.get(1, 0), 0.5);
        assert_eq!(d.get(2, 0), 0.0);
        assert_eq!(d.get(2, 1), 0.0);
    }

    #[test]
    fn projection_examples() {
        let m = PairMatrix::from_triplets(3, &[(1, 0, 0.5), (2, 0, -0.2), (2, 1, 1.3)]).unwrap();
        let p = project_box_budget(&m, 10.0);
        assert_eq!(p.values(), &[0.5, 0.0, 1.0]);
        let m = PairMatrix::from_triplets(3, &[(1, 0, 1.0), (2, 0, 1.0)]).unwrap();
        assert_eq!(project_box_budget(&m, 1.0).values(), &[0.5, 0.5]);
        let z = PairMatrix::full(4);
        assert_eq!(project_box_budget(&z, 3.0), z);
    }

    #[test]
    fn budget_examples() {
        let edges: Vec<(usize, usize)> = (0..10).map(|i| (i, i + 1)).collect();
        let g = Graph::from_edges(11, edges).unwrap();
        assert_eq!(compute_budget(&g, 0.5), 5.0);
        assert_eq!(compute_budget(&Graph::from_edges(4, []).unwrap(), 0.5), 0.0);
        let k3 = Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(compute_budget(&k3, 1.0), 3.0);
        assert_eq!(laplacian_edge_count(&lap(&k3)), 3);
    }

    #[test]
    fn zero_iterations_returns_projected_init() {
        let g = Graph::from_edges(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]).unwrap();
        let l = lap(&g);
        let c = [0.2, 0.9, 1.0, 0.4, 0.0, 0.6];
        let cfg = AugmentConfig {
            iterations: 0,
            k: 2,
            ..Default::default()
        };
        let plan = optimize_views(&l, &c, &cfg).unwrap();
        let (d, _) = init_deltas(&c);
        let want = project_box_budget(&d, 2.5);
        assert_eq!(plan.delta_max, want);
        assert_eq!(plan.delta_min, want);
        assert!(plan.history_max.is_empty());
    }

    #[test]
    fn sampling_extremes() {
        let g = Graph::from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)]).unwrap();
        let l = lap(&g);
        let c = [1.0; 5];
        let mut plan = optimize_views(
            &l,
            &c,
            &AugmentConfig {
                iterations: 0,
                k: 1,
                ..Default::default()
            },
        )
        .unwrap();
        plan.delta_max = PairMatrix::full(5);
        let mut ones = PairMatrix::full(5);
        ones.values_mut().iter_mut().for_each(|v| *v = 1.0);
        plan.delta_min = ones;
        let views = sample_views(&l, &c, &plan, 3, 1.0).unwrap();
        assert_eq!(views.view1.matrix, l.matrix);
        assert_eq!(views.sampled_pairs, (0, 10));
        let again = sample_views(&l, &c, &plan, 3, 1.0).unwrap();
        assert_eq!(views.view2.matrix, again.view2.matrix);
    }

    #[test]
    fn plan_text_roundtrip() {
        let g = Graph::from_edges(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)]).unwrap();
        let l = lap(&g);
        let c = [0.1, 0.3, 1.0, 0.7, 0.0, 0.5];
        let cfg = AugmentConfig {
            iterations: 3,
            k: 2,
            ..Default::default()
        };
        let plan = optimize_views(&l, &c, &cfg).unwrap();
        let mut buf = Vec::new();
        plan.write_to(&mut buf).unwrap();
        let back = AugmentationPlan::read_from(&buf[..], "mem").unwrap();
        assert_eq!(back, plan);
        let bad = String::from_utf8(buf).unwrap().replace("v1", "v9");
        assert!(AugmentationPlan::read_from(bad.as_bytes(), "mem").is_err());
    }

    #[test]
    fn large_graph_support_keeps_edges_and_top_pairs() {
        let n = SUBSAMPLE_THRESHOLD + 10;
        let edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        let g = Graph::from_edges(n, edges).unwrap();
        let l = lap(&g);
        let mut c = vec![0.0; n];
        c[5] = 1.0;
        c[100] = 0.9;
        c[7] = 0.8;
        let s = augmentation_support(&l, &c, 1e-6).unwrap();
        assert!(s.index_of(1, 0).is_some());
        // top non-edge products: (100,5), (7,5), (100,7)
        assert!(s.index_of(100, 5).is_some());
        assert!(s.index_of(7, 5).is_some());
        assert_eq!(s.len(), (n - 1) + ((1e-6 * ((n * (n - 1) / 2 - (n - 1)) as f64)).round() as usize));
    }
}
