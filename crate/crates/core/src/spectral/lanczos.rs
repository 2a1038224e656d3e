//! Symmetric Lanczos for a few extremal eigenpairs.
//!
//! The basis is kept fully reorthogonalized (classical Gram-Schmidt, applied
//! twice) and the projected matrix `Q^T A Q` is accumulated column by column,
//! so the Rayleigh-Ritz step does not depend on a three-term recurrence
//! staying exact. When the basis is full it is thick-restarted from the
//! wanted Ritz vectors plus the current residual direction.
//!
//! A Krylov space built from one start vector only sees one direction per
//! distinct eigenvalue, so after convergence the solver checks the deflated
//! complement for extremal values that should have been among the wanted
//! ones (repeated eigenvalues, e.g. one zero per connected component).

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Linear operator view of a real symmetric matrix.
pub trait SymOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    fn to_dense(&self) -> DMatrix<f64>;
}

impl SymOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.nrows();
        y.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..n {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            let col = self.column(j);
            for i in 0..n {
                y[i] += col[i] * xj;
            }
        }
    }

    fn to_dense(&self) -> DMatrix<f64> {
        self.clone()
    }
}

#[derive(Clone, Debug)]
pub(crate) struct LanczosParams {
    pub tol: f64,
    /// Matrix-vector products allowed per run.
    pub max_matvecs: usize,
    /// Breakdowns tolerated per run before giving up.
    pub max_breakdowns: usize,
}

#[derive(Clone, Debug, Default)]
pub(crate) struct RunStats {
    pub matvecs: usize,
    pub breakdowns: usize,
    pub restarts: usize,
}

#[derive(Debug)]
pub(crate) enum RunFailure {
    NotConverged,
    Breakdown,
}

/// Converged Ritz pairs, ascending by value.
pub(crate) struct RitzPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Two passes of classical Gram-Schmidt against both sets.
fn orthogonalize(w: &mut [f64], locked: &[Vec<f64>], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in locked.iter().chain(basis) {
            let h = dot(q, w);
            axpy(-h, q, w);
        }
    }
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng, locked: &[Vec<f64>], basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    for _ in 0..4 {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        orthogonalize(&mut v, locked, basis);
        let nv = norm(&v);
        if nv > 1e-8 {
            v.iter_mut().for_each(|x| *x /= nv);
            return Some(v);
        }
    }
    None
}

/// Dense symmetric eigendecomposition, ascending.
pub(crate) fn sorted_eigen(h: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let m = h.nrows();
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(m, m);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vecs)
}

/// Indices (into an ascending list of length `m`) of the `k_low` smallest
/// and `k_high` largest values, without overlap.
fn wanted_indices(m: usize, k_low: usize, k_high: usize) -> Vec<usize> {
    let low = k_low.min(m);
    let high = k_high.min(m - low);
    (0..low).chain(m - high..m).collect()
}

/// One Lanczos run on `A` restricted to the orthogonal complement of
/// `locked`, returning `k_low` smallest and `k_high` largest Ritz pairs with
/// residual `<= tol * max(1, |theta|)`.
pub(crate) fn lanczos_run<A: SymOperator + ?Sized>(
    op: &A,
    locked: &[Vec<f64>],
    k_low: usize,
    k_high: usize,
    params: &LanczosParams,
    rng: &mut ChaCha8Rng,
    stats: &mut RunStats,
) -> Result<RitzPairs, RunFailure> {
    let n = op.dim();
    let space = n - locked.len();
    let nwant = (k_low + k_high).min(space);
    if nwant == 0 {
        return Ok(RitzPairs {
            values: Vec::new(),
            vectors: Vec::new(),
            residuals: Vec::new(),
        });
    }
    let max_dim = space.min((2 * nwant + 20).max(40));
    let check_every = 5usize;

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_dim);
    let mut images: Vec<Vec<f64>> = Vec::with_capacity(max_dim);
    // projected matrix, row-major max_dim x max_dim
    let mut proj = vec![0.0; max_dim * max_dim];
    let mut candidate = random_unit(n, rng, locked, &basis);
    let mut since_check = 0usize;
    let mut run_breakdowns = 0usize;

    loop {
        // expansion
        while basis.len() < max_dim {
            let Some(q) = candidate.take() else { break };
            let mut aq = vec![0.0; n];
            op.apply(&q, &mut aq);
            stats.matvecs += 1;
            let m = basis.len();
            basis.push(q);
            for i in 0..=m {
                let h = dot(&basis[i], &aq);
                proj[i * max_dim + m] = h;
                proj[m * max_dim + i] = h;
            }
            let scale = norm(&aq);
            let mut w = aq.clone();
            images.push(aq);
            orthogonalize(&mut w, locked, &basis);
            let beta = norm(&w);
            since_check += 1;
            if basis.len() == space {
                break;
            }
            if beta <= 1e-10 * scale.max(f64::MIN_POSITIVE) {
                stats.breakdowns += 1;
                run_breakdowns += 1;
                if run_breakdowns > params.max_breakdowns {
                    return Err(RunFailure::Breakdown);
                }
                candidate = random_unit(n, rng, locked, &basis);
                if candidate.is_none() {
                    break;
                }
            } else {
                w.iter_mut().for_each(|x| *x /= beta);
                candidate = Some(w);
            }
            if basis.len() >= nwant && since_check >= check_every {
                break;
            }
        }
        since_check = 0;

        // Rayleigh-Ritz
        let m = basis.len();
        let h = DMatrix::from_fn(m, m, |i, j| 0.5 * (proj[i * max_dim + j] + proj[j * max_dim + i]));
        let (theta, s) = sorted_eigen(h);
        let full = m == space || candidate.is_none();
        if m >= nwant {
            let want = wanted_indices(m, k_low, k_high);
            let mut values = Vec::with_capacity(want.len());
            let mut vectors = Vec::with_capacity(want.len());
            let mut residuals = Vec::with_capacity(want.len());
            let mut ok = true;
            for &idx in &want {
                let mut y = vec![0.0; n];
                let mut ay = vec![0.0; n];
                for j in 0..m {
                    let c = s[(j, idx)];
                    axpy(c, &basis[j], &mut y);
                    axpy(c, &images[j], &mut ay);
                }
                axpy(-theta[idx], &y, &mut ay);
                let r = norm(&ay);
                if r > params.tol * theta[idx].abs().max(1.0) && !full {
                    ok = false;
                    break;
                }
                values.push(theta[idx]);
                vectors.push(y);
                residuals.push(r);
            }
            if ok {
                return Ok(RitzPairs {
                    values,
                    vectors,
                    residuals,
                });
            }
        }
        if full {
            // nothing left to expand, yet residuals are large
            return Err(RunFailure::NotConverged);
        }
        if stats.matvecs >= params.max_matvecs {
            return Err(RunFailure::NotConverged);
        }

        if m == max_dim {
            // thick restart: keep wanted Ritz vectors plus neighbours
            stats.restarts += 1;
            let spare = (max_dim - nwant) / 2;
            let keep = wanted_indices(m, k_low + spare / 2, k_high + spare / 2);
            let mut new_basis = Vec::with_capacity(keep.len());
            let mut new_images = Vec::with_capacity(keep.len());
            for &idx in &keep {
                let mut y = vec![0.0; n];
                let mut ay = vec![0.0; n];
                for j in 0..m {
                    let c = s[(j, idx)];
                    axpy(c, &basis[j], &mut y);
                    axpy(c, &images[j], &mut ay);
                }
                new_basis.push(y);
                new_images.push(ay);
            }
            basis = new_basis;
            images = new_images;
            proj.iter_mut().for_each(|v| *v = 0.0);
            let kept = basis.len();
            for i in 0..kept {
                for j in 0..kept {
                    let h = dot(&basis[i], &images[j]);
                    proj[i * max_dim + j] = h;
                }
            }
            if let Some(c) = candidate.as_mut() {
                orthogonalize(c, locked, &basis);
                let nc = norm(c);
                if nc > 1e-8 {
                    c.iter_mut().for_each(|x| *x /= nc);
                } else {
                    candidate = random_unit(n, rng, locked, &basis);
                }
            }
        }
    }
}

/// Outcome of [`extremal_pairs`].
pub(crate) struct Extremal {
    /// Ascending values: `k` lowest then `k` highest.
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub max_residual: f64,
    pub stats: RunStats,
}

/// `k` smallest and `k` largest eigenpairs of `op` (requires `2k < n`).
pub(crate) fn extremal_pairs<A: SymOperator + ?Sized>(
    op: &A,
    k: usize,
    params: &LanczosParams,
    seed: u64,
) -> Result<Extremal, RunFailure> {
    let n = op.dim();
    debug_assert!(2 * k < n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = RunStats::default();
    let first = lanczos_run(op, &[], k, k, params, &mut rng, &mut stats)?;

    let mut found: Vec<(f64, Vec<f64>, f64)> = first
        .values
        .into_iter()
        .zip(first.vectors)
        .zip(first.residuals)
        .map(|((v, x), r)| (v, x, r))
        .collect();

    // deflation check for eigenvalues missed by the single start vector
    loop {
        if found.len() >= n {
            break;
        }
        found.sort_by(|a, b| a.0.total_cmp(&b.0));
        let kth_low = found[k - 1].0;
        let kth_high = found[found.len() - k].0;
        let locked: Vec<Vec<f64>> = found.iter().map(|f| f.1.clone()).collect();
        let probe = lanczos_run(op, &locked, 1, 1, params, &mut rng, &mut stats)?;
        let slack = |v: f64| 10.0 * params.tol * v.abs().max(1.0);
        let mut added = false;
        for ((v, x), r) in probe.values.into_iter().zip(probe.vectors).zip(probe.residuals) {
            if v < kth_low - slack(kth_low) || v > kth_high + slack(kth_high) {
                found.push((v, x, r));
                added = true;
            }
        }
        if !added {
            break;
        }
    }

    found.sort_by(|a, b| a.0.total_cmp(&b.0));
    let m = found.len();
    let pick: Vec<usize> = (0..k).chain(m - k..m).collect();
    let mut values = Vec::with_capacity(2 * k);
    let mut vectors = Vec::with_capacity(2 * k);
    let mut max_residual: f64 = 0.0;
    for idx in pick {
        values.push(found[idx].0);
        vectors.push(found[idx].1.clone());
        max_residual = max_residual.max(found[idx].2);
    }
    Ok(Extremal {
        values,
        vectors,
        max_residual,
        stats,
    })
}
