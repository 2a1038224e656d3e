//! Selective eigendecomposition and the spectral-distance objective used to
//! optimize augmentation matrices.
//!
//! The modified operator for an augmentation `delta` on node pairs is
//!
//! ```text
//! E     = diag(c) (delta + delta^T) diag(c)
//! M     = sym(L + L E) = L + (L E + E L) / 2
//! ```
//!
//! and the objective compares the `k` lowest and `k` highest eigenvalues of
//! `M` with those of `L`, paired by sorted rank.

mod lanczos;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use lanczos::SymOperator;

use crate::error::{Error, Result};
use crate::graph::{Csr, NormalizedLaplacian, SparseSym};
use crate::pairs::PairMatrix;

/// Default seed for the Lanczos start vectors.
pub const DEFAULT_EIGEN_SEED: u64 = 0x1a2c_05;

/// Dense fallback is allowed up to this dimension.
pub const DENSE_FALLBACK_LIMIT: usize = 2048;

impl SymOperator for SparseSym {
    fn dim(&self) -> usize {
        SparseSym::dim(self)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec(x, y)
    }

    fn to_dense(&self) -> DMatrix<f64> {
        SparseSym::to_dense(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EigenMethod {
    Lanczos,
    Dense,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenDiagnostics {
    pub method: EigenMethod,
    pub matvecs: usize,
    pub restarts: usize,
    pub breakdowns: usize,
    /// Lanczos attempts used (each with a fresh seed); 0 for direct dense.
    pub attempts: usize,
    pub max_residual: f64,
}

/// `k` lowest and `k` highest eigenpairs, ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralSummary {
    pub k: usize,
    pub eigenvalues: Vec<f64>,
    /// `n x 2k`, orthonormal columns matching `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
    pub diagnostics: EigenDiagnostics,
}

impl SpectralSummary {
    /// Summary from bare eigenvalues (no vectors), e.g. for loss arithmetic.
    pub fn from_values(eigenvalues: Vec<f64>) -> Self {
        let k = eigenvalues.len() / 2;
        Self {
            k,
            eigenvectors: DMatrix::zeros(0, eigenvalues.len()),
            eigenvalues,
            diagnostics: EigenDiagnostics {
                method: EigenMethod::Dense,
                matvecs: 0,
                restarts: 0,
                breakdowns: 0,
                attempts: 0,
                max_residual: 0.0,
            },
        }
    }
}

fn dense_extremal(m: &DMatrix<f64>, k: usize) -> SpectralSummary {
    let n = m.nrows();
    let (values, vecs) = lanczos::sorted_eigen(m.clone());
    let idx: Vec<usize> = (0..k).chain(n - k..n).collect();
    let mut eigenvectors = DMatrix::zeros(n, 2 * k);
    let mut eigenvalues = Vec::with_capacity(2 * k);
    let mut max_residual: f64 = 0.0;
    for (dst, &src) in idx.iter().enumerate() {
        eigenvalues.push(values[src]);
        eigenvectors.set_column(dst, &vecs.column(src));
        let v = vecs.column(src);
        let r = (m * v - v * values[src]).norm();
        max_residual = max_residual.max(r);
    }
    SpectralSummary {
        k,
        eigenvalues,
        eigenvectors,
        diagnostics: EigenDiagnostics {
            method: EigenMethod::Dense,
            matvecs: 0,
            restarts: 0,
            breakdowns: 0,
            attempts: 0,
            max_residual,
        },
    }
}

/// `k` algebraically smallest and `k` largest eigenpairs of a symmetric
/// operator. Uses Lanczos unless `2k >= n`, in which case the full dense
/// decomposition is taken.
///
/// `tol` bounds each residual relative to `max(1, |lambda|)`; `max_iter`
/// caps matrix-vector products per Lanczos attempt.
pub fn extremal_eigs<A: SymOperator + ?Sized>(m: &A, k: usize, tol: f64, max_iter: usize) -> Result<SpectralSummary> {
    extremal_eigs_seeded(m, k, tol, max_iter, DEFAULT_EIGEN_SEED)
}

/// [`extremal_eigs`] with an explicit seed for the start vectors.
///
/// A failed attempt (no convergence within `max_iter`, repeated breakdown)
/// is retried up to three times with fresh seeds, then falls back to a dense
/// decomposition for `n <= 2048`.
pub fn extremal_eigs_seeded<A: SymOperator + ?Sized>(
    m: &A,
    k: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<SpectralSummary> {
    let n = m.dim();
    if k == 0 {
        return Err(Error::param("k", "must be at least 1"));
    }
    if 2 * k > n {
        return Err(Error::param("k", format!("{k} exceeds n/2 for n = {n}")));
    }
    if !(tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    if 2 * k >= n {
        return Ok(dense_extremal(&m.to_dense(), k));
    }
    let params = lanczos::LanczosParams {
        tol,
        max_matvecs: max_iter.max(1),
        max_breakdowns: 3,
    };
    let mut last_failure = None;
    for attempt in 0..4u64 {
        match lanczos::extremal_pairs(m, k, &params, seed.wrapping_add(attempt.wrapping_mul(0x9e37_79b9))) {
            Ok(out) => {
                let mut eigenvectors = DMatrix::zeros(n, 2 * k);
                for (j, v) in out.vectors.iter().enumerate() {
                    eigenvectors.set_column(j, &nalgebra::DVector::from_column_slice(v));
                }
                return Ok(SpectralSummary {
                    k,
                    eigenvalues: out.values,
                    eigenvectors,
                    diagnostics: EigenDiagnostics {
                        method: EigenMethod::Lanczos,
                        matvecs: out.stats.matvecs,
                        restarts: out.stats.restarts,
                        breakdowns: out.stats.breakdowns,
                        attempts: attempt as usize + 1,
                        max_residual: out.max_residual,
                    },
                });
            }
            Err(f) => {
                log::debug!("lanczos attempt {attempt} failed: {f:?}");
                last_failure = Some(f);
            }
        }
    }
    if n <= DENSE_FALLBACK_LIMIT {
        log::warn!("lanczos failed ({last_failure:?}); dense fallback for n = {n}");
        let mut s = dense_extremal(&m.to_dense(), k);
        s.diagnostics.attempts = 4;
        return Ok(s);
    }
    Err(Error::Eigen(format!(
        "lanczos failed after 4 attempts ({last_failure:?}), n = {n} too large for dense fallback"
    )))
}

/// What the augmentation optimizer measures on the modified spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Objective {
    /// Mean squared difference to the original extremal eigenvalues.
    SpectralDistance,
    /// Mean squared modified eigenvalue, ignoring the original.
    EigenNorm,
}

fn check_pairing(orig: &SpectralSummary, modified: &SpectralSummary) -> Result<()> {
    if orig.eigenvalues.len() != modified.eigenvalues.len() || orig.eigenvalues.is_empty() {
        return Err(Error::Shape(format!(
            "spectral summaries hold {} and {} eigenvalues",
            orig.eigenvalues.len(),
            modified.eigenvalues.len()
        )));
    }
    Ok(())
}

/// `sign / (2k) * sum_i (mod_i - orig_i)^2`, pairing eigenvalues by rank.
pub fn spectral_loss(orig: &SpectralSummary, modified: &SpectralSummary, sign: f64) -> Result<f64> {
    if sign != 1.0 && sign != -1.0 {
        return Err(Error::param("sign", format!("{sign} is not +1 or -1")));
    }
    Ok(sign * objective_value(orig, modified, Objective::SpectralDistance)?)
}

/// Unsigned objective value.
pub fn objective_value(orig: &SpectralSummary, modified: &SpectralSummary, objective: Objective) -> Result<f64> {
    check_pairing(orig, modified)?;
    let len = modified.eigenvalues.len() as f64;
    let total: f64 = match objective {
        Objective::SpectralDistance => orig
            .eigenvalues
            .iter()
            .zip(&modified.eigenvalues)
            .map(|(o, m)| (m - o).powi(2))
            .sum(),
        Objective::EigenNorm => modified.eigenvalues.iter().map(|m| m * m).sum(),
    };
    Ok(total / len)
}

/// Analytic gradient with respect to the augmentation pairs.
#[derive(Clone, Debug)]
pub struct SpectralGradient {
    /// Same support as the input `delta`.
    pub grad: PairMatrix,
    /// Clusters of (near-)equal eigenvalues whose projector was averaged.
    pub degenerate_clusters: usize,
}

/// Gap under which neighbouring eigenvalues are treated as one cluster.
pub const DEGENERACY_GAP: f64 = 1e-8;

/// Gradient of the unsigned spectral distance with respect to `delta`.
pub fn spectral_loss_grad(
    lap: &NormalizedLaplacian,
    c: &[f64],
    delta: &PairMatrix,
    mod_summary: &SpectralSummary,
    orig_summary: &SpectralSummary,
) -> Result<SpectralGradient> {
    objective_grad(lap, c, delta, mod_summary, orig_summary, Objective::SpectralDistance)
}

/// Gradient of [`objective_value`] with respect to `delta`.
///
/// Uses `d lambda_k / dM = v_k v_k^T` and the chain rule through
/// `M = L + (L E + E L)/2`, giving for a pair `(a, b)`
///
/// ```text
/// dJ/d delta_ab = c_a c_b sum_k w_k (v_k[a] u_k[b] + u_k[a] v_k[b]),  u_k = L v_k
/// ```
///
/// with `w_k = dJ/d lambda_k`. Within a cluster of eigenvalues closer than
/// [`DEGENERACY_GAP`] the weights are averaged, which is the gradient of the
/// cluster's projector-weighted sum.
pub fn objective_grad(
    lap: &NormalizedLaplacian,
    c: &[f64],
    delta: &PairMatrix,
    mod_summary: &SpectralSummary,
    orig_summary: &SpectralSummary,
    objective: Objective,
) -> Result<SpectralGradient> {
    let n = lap.dim();
    check_pairing(orig_summary, mod_summary)?;
    if c.len() != n || delta.n() != n {
        return Err(Error::Shape(format!(
            "laplacian n = {n}, centrality len = {}, delta n = {}",
            c.len(),
            delta.n()
        )));
    }
    let v = &mod_summary.eigenvectors;
    if v.nrows() != n || v.ncols() != mod_summary.eigenvalues.len() {
        return Err(Error::Shape("summary eigenvectors do not match the operator".into()));
    }
    let len = mod_summary.eigenvalues.len();
    let lam = &mod_summary.eigenvalues;
    let mut w: Vec<f64> = match objective {
        Objective::SpectralDistance => lam
            .iter()
            .zip(&orig_summary.eigenvalues)
            .map(|(m, o)| 2.0 * (m - o) / len as f64)
            .collect(),
        Objective::EigenNorm => lam.iter().map(|m| 2.0 * m / len as f64).collect(),
    };

    let mut degenerate_clusters = 0;
    let mut start = 0;
    while start < len {
        let mut end = start + 1;
        while end < len && (lam[end] - lam[end - 1]).abs() < DEGENERACY_GAP {
            end += 1;
        }
        if end - start > 1 {
            degenerate_clusters += 1;
            let mean = w[start..end].iter().sum::<f64>() / (end - start) as f64;
            w[start..end].iter_mut().for_each(|x| *x = mean);
        }
        start = end;
    }

    let u = lap.matrix.mul_dense(v)?;
    // row-major copies weighted by w for a tight inner loop
    let mut vw = vec![0.0; n * len];
    let mut uw = vec![0.0; n * len];
    let mut vr = vec![0.0; n * len];
    let mut ur = vec![0.0; n * len];
    for a in 0..n {
        for k in 0..len {
            vr[a * len + k] = v[(a, k)];
            ur[a * len + k] = u[(a, k)];
            vw[a * len + k] = w[k] * v[(a, k)];
            uw[a * len + k] = w[k] * u[(a, k)];
        }
    }
    let mut grad = delta.zeros_like();
    for (slot, &(a, b)) in grad.values_mut().iter_mut().zip(delta.pairs()) {
        let (a, b) = (a as usize, b as usize);
        let cc = c[a] * c[b];
        if cc == 0.0 {
            continue;
        }
        let (va, ua) = (&vw[a * len..(a + 1) * len], &uw[a * len..(a + 1) * len]);
        let (vb, ub) = (&vr[b * len..(b + 1) * len], &ur[b * len..(b + 1) * len]);
        let mut s = 0.0;
        for k in 0..len {
            s += va[k] * ub[k] + ua[k] * vb[k];
        }
        *slot = cc * s;
    }
    Ok(SpectralGradient {
        grad,
        degenerate_clusters,
    })
}

/// `sym(L + L diag(c) (delta + delta^T) diag(c))`.
///
/// Only one triangle is stored, so the result is exactly symmetric. With
/// `delta = 0` or `c = 0` the stored entries equal those of `L`.
pub fn build_modified_laplacian(lap: &NormalizedLaplacian, c: &[f64], delta: &PairMatrix) -> Result<SparseSym> {
    let n = lap.dim();
    if c.len() != n || delta.n() != n {
        return Err(Error::Shape(format!(
            "laplacian n = {n}, centrality len = {}, delta n = {}",
            c.len(),
            delta.n()
        )));
    }
    let mut e_entries = Vec::new();
    for (a, b, d) in delta.iter() {
        let v = c[a] * c[b] * d;
        if v != 0.0 {
            e_entries.push((a, b, v));
        }
    }
    if e_entries.is_empty() {
        return Ok(lap.matrix.clone());
    }
    let e = SparseSym::from_triplets(n, e_entries)?.to_csr();
    let l = lap.matrix.to_csr();
    let p = l.matmul(&e);
    let pt = p.transpose();
    Ok(symmetric_sum(&l, &p, &pt))
}

/// Lower triangle of `L + (P + P^T) / 2`.
fn symmetric_sum(l: &Csr, p: &Csr, pt: &Csr) -> SparseSym {
    let n = l.n_rows;
    let mut acc = vec![0.0; n];
    let mut seen = vec![false; n];
    let mut touched = Vec::new();
    let mut entries = Vec::new();
    for i in 0..n {
        for (m, half) in [(l, false), (p, true), (pt, true)] {
            let (cols, vals) = m.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j > i {
                    break;
                }
                if !seen[j] {
                    seen[j] = true;
                    touched.push(j);
                }
                acc[j] += if half { 0.5 * v } else { v };
            }
        }
        touched.sort_unstable();
        for &j in &touched {
            if acc[j] != 0.0 {
                entries.push((i, j, acc[j]));
            }
            acc[j] = 0.0;
            seen[j] = false;
        }
        touched.clear();
    }
    SparseSym::from_sorted_lower(n, entries)
}
