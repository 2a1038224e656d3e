//! Linear evaluation of frozen embeddings and structural poisoning attacks.

use std::collections::HashSet;

use nalgebra::DMatrix;
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

pub const PROBE_TOL: f64 = 1e-6;
pub const PROBE_MAX_ITER: usize = 5000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProbeMode {
    /// Multinomial logistic regression with an l2 penalty.
    Logistic,
    /// Ridge regression onto one-hot targets, predicting the argmax.
    Ridge,
}

/// Accuracy summary over seeds, folds or repeats.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub protocol: String,
    pub mean: f64,
    pub std: f64,
    pub values: Vec<f64>,
}

impl ProbeResult {
    pub fn from_values(protocol: impl Into<String>, values: Vec<f64>) -> Self {
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self {
            protocol: protocol.into(),
            mean,
            std: var.sqrt(),
            values,
        }
    }
}

/// Train/test column standardization fitted on the training rows.
fn standardize(x: &DMatrix<f64>, train: &[usize]) -> DMatrix<f64> {
    let d = x.ncols();
    let mut out = x.clone();
    for j in 0..d {
        let n = train.len().max(1) as f64;
        let mean = train.iter().map(|&i| x[(i, j)]).sum::<f64>() / n;
        let var = train.iter().map(|&i| (x[(i, j)] - mean).powi(2)).sum::<f64>() / n;
        let sd = if var > 1e-24 { var.sqrt() } else { 1.0 };
        for i in 0..x.nrows() {
            out[(i, j)] = (x[(i, j)] - mean) / sd;
        }
    }
    out
}

fn with_bias(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    let d = x.ncols();
    DMatrix::from_fn(rows.len(), d + 1, |r, j| if j < d { x[(rows[r], j)] } else { 1.0 })
}

fn check_probe_inputs(x: &DMatrix<f64>, labels: &[usize], train: &[usize], test: &[usize]) -> Result<usize> {
    if x.nrows() != labels.len() {
        return Err(Error::Shape(format!("{} embedding rows for {} labels", x.nrows(), labels.len())));
    }
    if let Some(&i) = train.iter().chain(test).find(|&&i| i >= labels.len()) {
        return Err(Error::Structure(format!("split index {i} out of range")));
    }
    if test.is_empty() {
        return Err(Error::Protocol("empty test split".into()));
    }
    let classes: HashSet<usize> = train.iter().map(|&i| labels[i]).collect();
    if classes.len() < 2 {
        return Err(Error::Protocol(format!("training split has {} class(es)", classes.len())));
    }
    Ok(labels.iter().max().map_or(0, |m| m + 1))
}

/// Softmax cross-entropy plus `l2/2 ||W||^2` (bias row unpenalized).
fn logistic_loss_grad(x: &DMatrix<f64>, y: &[usize], w: &DMatrix<f64>, l2: f64) -> (f64, DMatrix<f64>) {
    let n = x.nrows() as f64;
    let mut p = x * w;
    let mut loss = 0.0;
    for (i, mut row) in p.row_iter_mut().enumerate() {
        let m = row.max();
        row.apply(|v| *v = (*v - m).exp());
        let s = row.sum();
        row /= s;
        loss -= row[y[i]].max(1e-300).ln();
        row[y[i]] -= 1.0;
    }
    let mut grad = x.transpose() * p / n;
    loss /= n;
    let last = w.nrows() - 1;
    for i in 0..last {
        for j in 0..w.ncols() {
            loss += 0.5 * l2 * w[(i, j)] * w[(i, j)];
            grad[(i, j)] += l2 * w[(i, j)];
        }
    }
    (loss, grad)
}

/// Fitted logistic model on standardized, bias-augmented inputs.
fn fit_logistic(x: &DMatrix<f64>, y: &[usize], classes: usize, l2: f64) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(x.ncols(), classes);
    let (mut loss, mut grad) = logistic_loss_grad(x, y, &w, l2);
    let mut step = 1.0;
    for _ in 0..PROBE_MAX_ITER {
        let gnorm2 = grad.norm_squared();
        if gnorm2 == 0.0 {
            break;
        }
        // backtracking (Armijo) step along the negative gradient
        let (new_w, new_loss, new_grad) = loop {
            let cand = &w - &grad * step;
            let (l, g) = logistic_loss_grad(x, y, &cand, l2);
            if l <= loss - 0.5 * step * gnorm2 || step < 1e-12 {
                break (cand, l, g);
            }
            step *= 0.5;
        };
        let delta = loss - new_loss;
        w = new_w;
        loss = new_loss;
        grad = new_grad;
        if delta.abs() < PROBE_TOL {
            break;
        }
        step *= 2.0;
    }
    w
}

fn ridge_fit(x: &DMatrix<f64>, targets: &DMatrix<f64>, l2: f64) -> Result<DMatrix<f64>> {
    let mut gram = x.transpose() * x;
    let last = gram.nrows() - 1;
    for i in 0..last {
        gram[(i, i)] += l2;
    }
    // the tiny jitter keeps an unpenalized bias solvable on degenerate inputs
    gram[(last, last)] += 1e-12;
    let rhs = x.transpose() * targets;
    gram.clone()
        .cholesky()
        .map(|c| c.solve(&rhs))
        .or_else(|| gram.clone().lu().solve(&rhs))
        .ok_or_else(|| Error::Protocol("ridge system is singular".into()))
}

fn argmax_rows(s: &DMatrix<f64>) -> Vec<usize> {
    s.row_iter().map(|r| r.transpose().argmax().0).collect()
}

/// Test accuracy of a linear classifier trained on `train` rows.
pub fn linear_probe(
    embeddings: &DMatrix<f64>,
    labels: &[usize],
    train: &[usize],
    test: &[usize],
    l2: f64,
    mode: ProbeMode,
) -> Result<ProbeResult> {
    let classes = check_probe_inputs(embeddings, labels, train, test)?;
    let z = standardize(embeddings, train);
    let xtr = with_bias(&z, train);
    let xte = with_bias(&z, test);
    let ytr: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let scores = match mode {
        ProbeMode::Logistic => &xte * fit_logistic(&xtr, &ytr, classes, l2),
        ProbeMode::Ridge => {
            let onehot = DMatrix::from_fn(train.len(), classes, |r, c| if ytr[r] == c { 1.0 } else { 0.0 });
            &xte * ridge_fit(&xtr, &onehot, l2)?
        }
    };
    let pred = argmax_rows(&scores);
    let correct = pred.iter().zip(test).filter(|(p, &i)| **p == labels[i]).count();
    let acc = correct as f64 / test.len() as f64;
    Ok(ProbeResult::from_values(
        match mode {
            ProbeMode::Logistic => "logistic",
            ProbeMode::Ridge => "ridge",
        },
        vec![acc],
    ))
}

/// Ridge regression on raw targets; returns the test `R^2` per output column
/// averaged.
pub fn ridge_r2(x: &DMatrix<f64>, targets: &DMatrix<f64>, train: &[usize], test: &[usize], l2: f64) -> Result<f64> {
    if x.nrows() != targets.nrows() {
        return Err(Error::Shape("embedding and target rows differ".into()));
    }
    let xtr = with_bias(x, train);
    let ttr = targets.select_rows(train.iter());
    let w = ridge_fit(&xtr, &ttr, l2)?;
    let pred = with_bias(x, test) * w;
    let tte = targets.select_rows(test.iter());
    let mut r2 = 0.0;
    for j in 0..targets.ncols() {
        let col = tte.column(j);
        let mean = col.mean();
        let ss_tot: f64 = col.iter().map(|v| (v - mean).powi(2)).sum();
        let ss_res: f64 = col.iter().zip(pred.column(j).iter()).map(|(a, b)| (a - b).powi(2)).sum();
        r2 += if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else if ss_res < 1e-20 { 1.0 } else { 0.0 };
    }
    Ok(r2 / targets.ncols().max(1) as f64)
}

/// Stratified random split, one per seed, probes run in parallel.
pub fn seeded_probe(
    embeddings: &DMatrix<f64>,
    labels: &[usize],
    train_frac: f64,
    seeds: &[u64],
    l2: f64,
    mode: ProbeMode,
) -> Result<ProbeResult> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::param("train_frac", "must lie in (0, 1)"));
    }
    let results: Vec<Result<f64>> = std::thread::scope(|s| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                s.spawn(move || {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let split = crate::data::stratified_split(labels, train_frac, 0.0, &mut rng);
                    linear_probe(embeddings, labels, &split["train"], &split["test"], l2, mode).map(|r| r.mean)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("probe thread")).collect()
    });
    let values = results.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(ProbeResult::from_values(format!("seeded-{}", values.len()), values))
}

/// Stratified `k`-fold assignment: each class is shuffled and dealt
/// round-robin, continuing where the previous class stopped.
pub fn stratified_folds(labels: &[usize], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for c in 0..classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(rng);
        for i in idx {
            folds[next % k].push(i);
            next += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    folds
}

/// Repeated stratified k-fold accuracy; `values` holds one mean per repeat.
pub fn kfold_eval(
    embeddings: &DMatrix<f64>,
    labels: &[usize],
    k: usize,
    repeats: usize,
    seed: u64,
    l2: f64,
    mode: ProbeMode,
) -> Result<ProbeResult> {
    if k < 2 {
        return Err(Error::param("k", "need at least 2 folds"));
    }
    if k > labels.len() {
        return Err(Error::Protocol(format!("{k} folds for {} samples", labels.len())));
    }
    let mut values = Vec::with_capacity(repeats);
    for r in 0..repeats {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
        let folds = stratified_folds(labels, k, &mut rng);
        let accs: Vec<Result<f64>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..k)
                .map(|f| {
                    let folds = &folds;
                    s.spawn(move || {
                        let train: Vec<usize> = (0..k).filter(|&o| o != f).flat_map(|o| folds[o].iter().copied()).collect();
                        linear_probe(embeddings, labels, &train, &folds[f], l2, mode).map(|p| p.mean)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("fold thread")).collect()
        });
        let accs = accs.into_iter().collect::<Result<Vec<f64>>>()?;
        values.push(accs.iter().sum::<f64>() / k as f64);
    }
    Ok(ProbeResult::from_values(format!("{k}-fold x{repeats}"), values))
}

fn attack_budget(g: &Graph, sigma: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&sigma) {
        return Err(Error::param("sigma", format!("{sigma} not in [0, 1]")));
    }
    Ok((sigma * g.n_edges() as f64).round() as usize)
}

fn random_pair(rng: &mut ChaCha8Rng, n: usize) -> (usize, usize) {
    loop {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            return (a.min(b), a.max(b));
        }
    }
}

/// Flips `round(sigma * |E|)` distinct uniformly chosen node pairs.
pub fn random_attack(g: &Graph, sigma: f64, seed: u64) -> Result<Graph> {
    let n = g.n_nodes();
    let total_pairs = n * n.saturating_sub(1) / 2;
    let budget = attack_budget(g, sigma)?.min(total_pairs);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = HashSet::with_capacity(budget);
    while chosen.len() < budget {
        chosen.insert(random_pair(&mut rng, n));
    }
    let mut edges = g.edge_set();
    let mut order: Vec<(usize, usize)> = chosen.into_iter().collect();
    order.sort_unstable();
    for p in order {
        if !edges.remove(&p) {
            edges.insert(p);
        }
    }
    g.with_edges(edges)
}

/// Removes within-class edges and adds cross-class non-edges, half the
/// budget each; a category that runs out passes its remainder to the other.
pub fn dice_attack(g: &Graph, labels: &[usize], sigma: f64, seed: u64) -> Result<Graph> {
    let n = g.n_nodes();
    if labels.len() != n {
        return Err(Error::Shape(format!("{} labels for {n} nodes", labels.len())));
    }
    let budget = attack_budget(g, sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let internal: Vec<(usize, usize)> = g.edges().iter().copied().filter(|&(a, b)| labels[a] == labels[b]).collect();
    let edges = g.edge_set();
    let cross_total: usize = {
        let mut counts = std::collections::HashMap::new();
        for &l in labels {
            *counts.entry(l).or_insert(0usize) += 1;
        }
        let same: usize = counts.values().map(|c| c * (c - 1) / 2).sum();
        n * n.saturating_sub(1) / 2 - same
    };
    let cross_edges = g.edges().iter().filter(|&&(a, b)| labels[a] != labels[b]).count();
    let cross_free = cross_total - cross_edges;

    let mut n_del = budget / 2 + budget % 2;
    let mut n_add = budget / 2;
    if n_del > internal.len() {
        n_add += n_del - internal.len();
        n_del = internal.len();
    }
    if n_add > cross_free {
        let spill = n_add - cross_free;
        n_add = cross_free;
        n_del = (n_del + spill).min(internal.len());
    }

    let mut out: HashSet<(usize, usize)> = edges.clone();
    for i in index::sample(&mut rng, internal.len(), n_del) {
        out.remove(&internal[i]);
    }
    let mut added = HashSet::with_capacity(n_add);
    while added.len() < n_add {
        let p = random_pair(&mut rng, n);
        if labels[p.0] != labels[p.1] && !edges.contains(&p) {
            added.insert(p);
        }
    }
    out.extend(added);
    g.with_edges(out)
}
