//! Node centrality measures and their weighted, min-max normalized mix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// One centrality measure and its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Measure {
    Degree,
    PageRank { damping: f64 },
    /// `alpha = None` picks `0.9 / lambda_max(A)`.
    Katz { alpha: Option<f64> },
}

impl Measure {
    pub fn name(&self) -> &'static str {
        match self {
            Measure::Degree => "degree",
            Measure::PageRank { .. } => "pagerank",
            Measure::Katz { .. } => "katz",
        }
    }

    pub fn parse(s: &str) -> Option<Measure> {
        match s.trim() {
            "degree" | "dc" => Some(Measure::Degree),
            "pagerank" | "pc" => Some(Measure::PageRank { damping: 0.85 }),
            "katz" | "kc" => Some(Measure::Katz { alpha: None }),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CentralityConfig {
    pub measures: Vec<Measure>,
    /// Mixing weights; `None` means uniform `1/K`.
    pub weights: Option<Vec<f64>>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CentralityConfig {
    fn default() -> Self {
        Self {
            measures: vec![
                Measure::Degree,
                Measure::PageRank { damping: 0.85 },
                Measure::Katz { alpha: None },
            ],
            weights: None,
            tol: 1e-10,
            max_iter: 1000,
        }
    }
}

/// Raw per-measure scores, mixing weights and the combined `[0, 1]` vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CentralityProfile {
    pub measures: Vec<Measure>,
    /// `scores[k][i]` is measure `k` at node `i`.
    pub scores: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub combined: Vec<f64>,
}

impl CentralityProfile {
    pub fn compute(g: &Graph, cfg: &CentralityConfig) -> Result<Self> {
        if cfg.measures.is_empty() {
            return Err(Error::param("measures", "at least one centrality measure"));
        }
        let mut scores = Vec::with_capacity(cfg.measures.len());
        for m in &cfg.measures {
            let s = match *m {
                Measure::Degree => degree_centrality(g),
                Measure::PageRank { damping } => {
                    let pr = pagerank(g, damping, cfg.tol, cfg.max_iter)?;
                    if !pr.converged {
                        log::warn!("pagerank did not converge in {} iterations", pr.iterations);
                    }
                    pr.scores
                }
                Measure::Katz { alpha } => {
                    let alpha = match alpha {
                        Some(a) => a,
                        None => default_katz_alpha(g),
                    };
                    katz_centrality(g, alpha, cfg.tol, cfg.max_iter)?.scores
                }
            };
            scores.push(s);
        }
        let k = cfg.measures.len();
        let weights = cfg.weights.clone().unwrap_or_else(|| vec![1.0 / k as f64; k]);
        let combined = combine_and_normalize(&scores, &weights)?;
        Ok(Self {
            measures: cfg.measures.clone(),
            scores,
            weights,
            combined,
        })
    }

    /// Recombine the stored scores with new weights.
    pub fn reweighted(&self, weights: Vec<f64>) -> Result<Self> {
        let combined = combine_and_normalize(&self.scores, &weights)?;
        Ok(Self {
            measures: self.measures.clone(),
            scores: self.scores.clone(),
            weights,
            combined,
        })
    }
}

/// `deg(i) / max(1, n - 1)`.
pub fn degree_centrality(g: &Graph) -> Vec<f64> {
    let denom = (g.n_nodes().saturating_sub(1)).max(1) as f64;
    g.degrees().into_iter().map(|d| d as f64 / denom).collect()
}

/// PageRank scores with convergence status.
#[derive(Clone, Debug, PartialEq)]
pub struct PageRankResult {
    pub scores: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Power iteration with uniform teleport and uniform redistribution of
/// dangling mass. Stops when the L1 change drops to `tol`.
pub fn pagerank(g: &Graph, damping: f64, tol: f64, max_iter: usize) -> Result<PageRankResult> {
    if !(damping > 0.0 && damping < 1.0) {
        return Err(Error::param("damping", format!("{damping} not in (0, 1)")));
    }
    if !(tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    let n = g.n_nodes();
    if n == 0 {
        return Ok(PageRankResult {
            scores: Vec::new(),
            iterations: 0,
            converged: true,
        });
    }
    let adj = g.adjacency_lists();
    let nf = n as f64;
    let mut x = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let dangling: f64 = (0..n).filter(|&i| adj[i].is_empty()).map(|i| x[i]).sum();
        let base = (1.0 - damping) / nf + damping * dangling / nf;
        next.iter_mut().for_each(|v| *v = base);
        for (j, nbrs) in adj.iter().enumerate() {
            if nbrs.is_empty() {
                continue;
            }
            let share = damping * x[j] / nbrs.len() as f64;
            for &i in nbrs {
                next[i] += share;
            }
        }
        let resid: f64 = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut x, &mut next);
        if resid <= tol {
            converged = true;
            break;
        }
    }
    let total: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= total);
    Ok(PageRankResult {
        scores: x,
        iterations,
        converged,
    })
}

/// Power-iteration estimate of the largest adjacency eigenvalue.
///
/// Iterates on `A + I` so bipartite graphs do not oscillate. The Rayleigh
/// quotient is a lower bound on the true value.
pub fn adjacency_spectral_radius(g: &Graph) -> f64 {
    let n = g.n_nodes();
    if g.n_edges() == 0 {
        return 0.0;
    }
    let adj = g.adjacency_lists();
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut y = vec![0.0; n];
    let mut estimate = 0.0;
    for _ in 0..2000 {
        for i in 0..n {
            y[i] = x[i] + adj[i].iter().map(|&j| x[j]).sum::<f64>();
        }
        let rq: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() - 1.0;
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        y.iter_mut().for_each(|v| *v /= norm);
        std::mem::swap(&mut x, &mut y);
        if (rq - estimate).abs() <= 1e-13 * rq.abs().max(1.0) {
            estimate = rq;
            break;
        }
        estimate = rq;
    }
    estimate
}

pub fn default_katz_alpha(g: &Graph) -> f64 {
    let lambda = adjacency_spectral_radius(g);
    if lambda > 0.0 {
        0.9 / lambda
    } else {
        0.1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KatzResult {
    pub scores: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Solves `x = alpha A x + 1` by fixed-point iteration.
///
/// `alpha` must be below `1 / lambda_max(A)`; the bound is checked against a
/// power-iteration estimate and divergence during iteration is reported as a
/// parameter error too.
pub fn katz_centrality(g: &Graph, alpha: f64, tol: f64, max_iter: usize) -> Result<KatzResult> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::param("alpha", format!("{alpha} must be positive")));
    }
    if !(tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    let n = g.n_nodes();
    let lambda = adjacency_spectral_radius(g);
    let rate = alpha * lambda;
    if rate >= 1.0 {
        return Err(Error::param(
            "alpha",
            format!("{alpha} >= 1/lambda_max = {}; Katz series diverges", 1.0 / lambda),
        ));
    }
    let adj = g.adjacency_lists();
    let mut x = vec![1.0; n];
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = n == 0 || g.n_edges() == 0;
    while !converged && iterations < max_iter {
        iterations += 1;
        for i in 0..n {
            next[i] = 1.0 + alpha * adj[i].iter().map(|&j| x[j]).sum::<f64>();
        }
        let change = x
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut x, &mut next);
        if !change.is_finite() || change > 1e15 {
            return Err(Error::param("alpha", "Katz iteration diverged"));
        }
        // a-posteriori bound on the distance to the fixed point
        if change * rate / (1.0 - rate) <= tol || change == 0.0 {
            converged = true;
        }
    }
    Ok(KatzResult {
        scores: x,
        iterations,
        converged,
    })
}

/// Weighted sum of measure rows followed by min-max normalization.
/// A constant combined vector maps to 0.5 everywhere.
pub fn combine_and_normalize(scores: &[Vec<f64>], weights: &[f64]) -> Result<Vec<f64>> {
    if scores.len() != weights.len() {
        return Err(Error::Shape(format!(
            "{} score rows, {} weights",
            scores.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::param("weights", "must be finite"));
    }
    if !weights.iter().any(|&w| w != 0.0) {
        return Err(Error::param("weights", "at least one weight must be nonzero"));
    }
    let n = scores.first().map_or(0, Vec::len);
    if scores.iter().any(|r| r.len() != n) {
        return Err(Error::Shape("score rows differ in length".into()));
    }
    let mut combined = vec![0.0; n];
    for (row, &w) in scores.iter().zip(weights) {
        for (c, &s) in combined.iter_mut().zip(row) {
            *c += w * s;
        }
    }
    let lo = combined.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = combined.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if n == 0 {
        return Ok(combined);
    }
    if !(span > 0.0) {
        return Ok(vec![0.5; n]);
    }
    Ok(combined.into_iter().map(|c| (c - lo) / span).collect())
}

/// Points of the probability simplex on a grid with `resolution` steps.
pub fn simplex_grid(k: usize, resolution: usize) -> Vec<Vec<f64>> {
    fn rec(k: usize, left: usize, res: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if cur.len() + 1 == k {
            cur.push(left);
            out.push(cur.iter().map(|&c| c as f64 / res as f64).collect());
            cur.pop();
            return;
        }
        for take in 0..=left {
            cur.push(take);
            rec(k, left - take, res, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k == 0 || resolution == 0 {
        return out;
    }
    rec(k, resolution, resolution, &mut Vec::new(), &mut out);
    out
}

/// Coordinate ascent over simplex grid points, maximizing `score`
/// (typically downstream probe accuracy). Starts from uniform weights and
/// moves one coordinate at a time to each grid level, rescaling the others.
pub fn tune_weights<F>(k: usize, resolution: usize, max_rounds: usize, mut score: F) -> Result<(Vec<f64>, f64)>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if k == 0 || resolution == 0 {
        return Err(Error::param("resolution", "need k >= 1 and resolution >= 1"));
    }
    let mut best = vec![1.0 / k as f64; k];
    let mut best_score = score(&best)?;
    for _ in 0..max_rounds {
        let mut improved = false;
        for coord in 0..k {
            for level in 0..=resolution {
                let target = level as f64 / resolution as f64;
                let rest: f64 = best.iter().enumerate().filter(|&(i, _)| i != coord).map(|(_, w)| w).sum();
                let mut cand = vec![0.0; k];
                for i in 0..k {
                    cand[i] = if i == coord {
                        target
                    } else if rest > 0.0 {
                        best[i] / rest * (1.0 - target)
                    } else if k > 1 {
                        (1.0 - target) / (k - 1) as f64
                    } else {
                        0.0
                    };
                }
                if !cand.iter().any(|&w| w > 0.0) {
                    continue;
                }
                let s = score(&cand)?;
                if s > best_score + 1e-12 {
                    best_score = s;
                    best = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    Ok((best, best_score))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn star4() -> Graph {
        Graph::from_edges(4, [(0, 1), (0, 2), (0, 3)]).unwrap()
    }

    fn complete(n: usize) -> Graph {
        let mut e = Vec::new();
        for i in 0..n {
            for j in 0..i {
                e.push((i, j));
            }
        }
        Graph::from_edges(n, e).unwrap()
    }

    #[test]
    fn degree_examples() {
        let d = degree_centrality(&star4());
        assert_eq!(d[0], 1.0);
        assert!((d[1] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(degree_centrality(&Graph::from_edges(3, []).unwrap()), vec![0.0; 3]);
        assert_eq!(degree_centrality(&complete(3)), vec![1.0; 3]);
    }

    #[test]
    fn pagerank_examples() {
        let pr = pagerank(&complete(2), 0.85, 1e-12, 100).unwrap();
        assert!(pr.converged);
        assert!(pr.scores.iter().all(|&s| (s - 0.5).abs() < 1e-12));
        let one = pagerank(&Graph::from_edges(1, []).unwrap(), 0.85, 1e-12, 100).unwrap();
        assert_eq!(one.scores, vec![1.0]);
        let k4 = pagerank(&complete(4), 0.85, 1e-12, 100).unwrap();
        assert!(k4.scores.iter().all(|&s| (s - 0.25).abs() < 1e-12));
    }

    #[test]
    fn pagerank_flags_non_convergence() {
        let g = Graph::from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)]).unwrap();
        let pr = pagerank(&g, 0.85, 1e-14, 2).unwrap();
        assert!(!pr.converged);
        assert!((pr.scores.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(pagerank(&g, 1.0, 1e-6, 10).is_err());
    }

    #[test]
    fn pagerank_with_dangling_nodes_sums_to_one() {
        let g = Graph::from_edges(5, [(0, 1), (1, 2)]).unwrap();
        let pr = pagerank(&g, 0.85, 1e-12, 1000).unwrap();
        assert!((pr.scores.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(pr.scores[1] > pr.scores[3]);
    }

    #[test]
    fn katz_examples() {
        let empty = katz_centrality(&Graph::from_edges(3, []).unwrap(), 0.5, 1e-12, 100).unwrap();
        assert_eq!(empty.scores, vec![1.0; 3]);
        // x = 1 + 0.25 x  =>  x = 4/3
        let k2 = katz_centrality(&complete(2), 0.25, 1e-13, 1000).unwrap();
        assert!(k2.scores.iter().all(|&s| (s - 4.0 / 3.0).abs() < 1e-12));
        // x = 1 + 0.2 * 2x  =>  x = 5/3
        let k3 = katz_centrality(&complete(3), 0.2, 1e-13, 1000).unwrap();
        assert!(k3.scores.iter().all(|&s| (s - 5.0 / 3.0).abs() < 1e-12));
    }

    #[test]
    fn katz_rejects_divergent_alpha() {
        // lambda_max(K3) = 2
        assert!(katz_centrality(&complete(3), 0.5, 1e-9, 100).is_err());
        assert!(katz_centrality(&complete(3), 0.6, 1e-9, 100).is_err());
    }

    #[test]
    fn katz_matches_dense_solve() {
        let g = Graph::from_edges(6, [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 5), (5, 3)]).unwrap();
        let alpha = default_katz_alpha(&g);
        let k = katz_centrality(&g, alpha, 1e-12, 10_000).unwrap();
        let a = crate::graph::build_adjacency(&g).to_dense();
        let m = DMatrix::identity(6, 6) - a * alpha;
        let x = m.lu().solve(&DVector::from_element(6, 1.0)).unwrap();
        for i in 0..6 {
            assert!((k.scores[i] - x[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn spectral_radius_of_bipartite_star() {
        // star with 3 leaves: sqrt(3)
        assert!((adjacency_spectral_radius(&star4()) - 3f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn combine_examples() {
        let out = combine_and_normalize(&[vec![0.0, 5.0, 10.0]], &[1.0]).unwrap();
        assert_eq!(out, vec![0.0, 0.5, 1.0]);
        let flat = combine_and_normalize(&[vec![2.0, 2.0], vec![3.0, 3.0]], &[0.5, 0.5]).unwrap();
        assert_eq!(flat, vec![0.5, 0.5]);
        // 2*(1,3) + 0*(9,9) = (2,6) -> (0,1)
        let two = combine_and_normalize(&[vec![1.0, 3.0], vec![9.0, 9.0]], &[2.0, 0.0]).unwrap();
        assert_eq!(two, vec![0.0, 1.0]);
        assert!(combine_and_normalize(&[vec![1.0]], &[0.0]).is_err());
        assert!(combine_and_normalize(&[vec![1.0]], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn profile_default_has_three_measures() {
        let p = CentralityProfile::compute(&star4(), &CentralityConfig::default()).unwrap();
        assert_eq!(p.scores.len(), 3);
        assert_eq!(p.combined[0], 1.0);
        assert!(p.combined.iter().all(|&c| (0.0..=1.0).contains(&c)));
    }

    #[test]
    fn simplex_grid_sizes() {
        // C(res + k - 1, k - 1)
        assert_eq!(simplex_grid(3, 2).len(), 6);
        assert!(simplex_grid(3, 4).iter().all(|w| (w.iter().sum::<f64>() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn tuner_finds_peak_of_concave_objective() {
        let target = [0.0, 0.5, 0.5];
        let (w, s) = tune_weights(3, 4, 10, |w| {
            Ok(-w.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
        })
        .unwrap();
        assert!(s > -1e-9, "{w:?} {s}");
    }
}
