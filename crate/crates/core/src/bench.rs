//! Timing and memory counters for the augmentation pipeline.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::augment::{bernoulli_sample, init_on_support, project_box_budget};
use crate::centrality::{CentralityConfig, CentralityProfile};
use crate::data::{generate_sbm, SbmConfig};
use crate::error::Result;
use crate::graph::{build_adjacency, normalized_laplacian, Graph, NormalizedLaplacian};
use crate::pairs::PairMatrix;
use crate::spectral::{build_modified_laplacian, extremal_eigs_seeded};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    /// Sizes for the `n` sweep at `fixed_k`.
    pub ns: Vec<usize>,
    pub fixed_k: usize,
    /// Eigenvalue counts for the `K` sweep at `fixed_n`.
    pub ks: Vec<usize>,
    pub fixed_n: usize,
    /// Timed repetitions per point; the fastest is reported.
    pub reps: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            ns: vec![200, 400, 800],
            fixed_k: 8,
            ks: vec![8, 16, 32],
            fixed_n: 800,
            reps: 9,
            tol: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenTiming {
    pub n: usize,
    pub k: usize,
    pub seconds: f64,
    pub matvecs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryRow {
    pub n: usize,
    pub edges: usize,
    pub laplacian_nnz: usize,
    pub laplacian_bytes: usize,
    /// Bytes of a full-support augmentation matrix.
    pub delta_bytes: usize,
    /// Modified Laplacian built from one Bernoulli sample.
    pub sampled_nnz: usize,
    pub sampled_bytes: usize,
    /// Modified Laplacian built from the dense expectation.
    pub dense_nnz: usize,
    pub dense_bytes: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub by_n: Vec<EigenTiming>,
    pub by_k: Vec<EigenTiming>,
    pub memory: Vec<MemoryRow>,
}

/// SBM with average degree about 11 and its Laplacian and centrality.
pub fn bench_graph(n: usize, seed: u64) -> Result<(Graph, NormalizedLaplacian, Vec<f64>)> {
    let p_in = (20.0 / n.max(2) as f64).min(1.0);
    let bundle = generate_sbm(&SbmConfig {
        n,
        blocks: 2.min(n.max(1)),
        p_in,
        p_out: p_in / 10.0,
        d_feat: 0,
        train_frac: 0.0,
        val_frac: 0.0,
        seed,
        ..Default::default()
    })?;
    let g = bundle.graphs.into_iter().next().expect("one graph");
    let lap = normalized_laplacian(&build_adjacency(&g));
    let c = CentralityProfile::compute(&g, &CentralityConfig::default())?.combined;
    Ok((g, lap, c))
}

/// Dense modified Laplacian from the projected `c c^T` initialization.
pub fn dense_modified(lap: &NormalizedLaplacian, c: &[f64], budget: f64) -> Result<nalgebra::DMatrix<f64>> {
    let delta = project_box_budget(&init_on_support(&PairMatrix::full(lap.dim()), c), budget);
    Ok(build_modified_laplacian(lap, c, &delta)?.to_dense())
}

/// Times every `(n, k)` point, cycling through all points once per
/// repetition so slow drift of the machine hits each point alike.
fn time_points(points: &[(usize, usize)], cfg: &BenchConfig) -> Result<Vec<EigenTiming>> {
    let mut mats = std::collections::BTreeMap::new();
    for &(n, _) in points {
        if let std::collections::btree_map::Entry::Vacant(e) = mats.entry(n) {
            let (g, lap, c) = bench_graph(n, cfg.seed)?;
            e.insert(dense_modified(&lap, &c, 0.5 * g.n_edges() as f64)?);
        }
    }
    let mut rows: Vec<EigenTiming> = points
        .iter()
        .map(|&(n, k)| EigenTiming {
            n,
            k,
            seconds: f64::INFINITY,
            matvecs: 0,
        })
        .collect();
    for _ in 0..cfg.reps.max(1) {
        for row in rows.iter_mut() {
            let t0 = Instant::now();
            let s = extremal_eigs_seeded(&mats[&row.n], row.k, cfg.tol, 100_000, cfg.seed)?;
            row.seconds = row.seconds.min(t0.elapsed().as_secs_f64());
            row.matvecs = s.diagnostics.matvecs;
        }
    }
    Ok(rows)
}

pub fn memory_row(n: usize, seed: u64) -> Result<MemoryRow> {
    let (g, lap, c) = bench_graph(n, seed)?;
    let budget = 0.5 * g.n_edges() as f64;
    let delta = project_box_budget(&init_on_support(&PairMatrix::full(n), &c), budget);
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
    let sample = bernoulli_sample(&delta, 1.0, &mut rng);
    let sparse = build_modified_laplacian(&lap, &c, &PairMatrix::from_triplets(n, &sample.nonzeros())?)?;
    let dense = build_modified_laplacian(&lap, &c, &delta)?;
    Ok(MemoryRow {
        n,
        edges: g.n_edges(),
        laplacian_nnz: lap.matrix.nnz(),
        laplacian_bytes: lap.matrix.bytes(),
        delta_bytes: delta.bytes(),
        sampled_nnz: sparse.nnz(),
        sampled_bytes: sparse.bytes(),
        dense_nnz: dense.nnz(),
        dense_bytes: dense.bytes(),
    })
}

/// Runs both sweeps and the memory counters. Sizes below 2 are skipped.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    let mut report = BenchReport::default();
    let by_n: Vec<(usize, usize)> = cfg
        .ns
        .iter()
        .filter(|&&n| n >= 2 * cfg.fixed_k.max(1))
        .map(|&n| (n, cfg.fixed_k))
        .collect();
    let by_k: Vec<(usize, usize)> = if cfg.fixed_n >= 2 {
        cfg.ks
            .iter()
            .filter(|&&k| k >= 1 && 2 * k <= cfg.fixed_n)
            .map(|&k| (cfg.fixed_n, k))
            .collect()
    } else {
        Vec::new()
    };
    // (fixed_n, fixed_k) usually sits in both sweeps; time it once
    let mut points = [by_n.clone(), by_k.clone()].concat();
    points.sort_unstable();
    points.dedup();
    let timed = time_points(&points, cfg)?;
    let lookup = |p: &(usize, usize)| timed[points.binary_search(p).expect("point timed")].clone();
    report.by_n = by_n.iter().map(lookup).collect();
    report.by_k = by_k.iter().map(lookup).collect();
    for &(n, _) in &by_n {
        report.memory.push(memory_row(n, cfg.seed)?);
    }
    Ok(report)
}

impl BenchReport {
    pub fn is_empty(&self) -> bool {
        self.by_n.is_empty() && self.by_k.is_empty() && self.memory.is_empty()
    }

    /// Consecutive time ratios of a sweep.
    pub fn ratios(rows: &[EigenTiming]) -> Vec<f64> {
        rows.windows(2).map(|w| w[1].seconds / w[0].seconds.max(1e-12)).collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if self.is_empty() {
            s.push_str("empty report\n");
            return s;
        }
        s.push_str("eigensolve vs n\n      n      k    seconds  matvecs\n");
        for r in &self.by_n {
            s.push_str(&format!("{:>7} {:>6} {:>10.4} {:>8}\n", r.n, r.k, r.seconds, r.matvecs));
        }
        s.push_str("eigensolve vs k\n      n      k    seconds  matvecs\n");
        for r in &self.by_k {
            s.push_str(&format!("{:>7} {:>6} {:>10.4} {:>8}\n", r.n, r.k, r.seconds, r.matvecs));
        }
        s.push_str("memory\n      n  edges  lap_nnz  lap_bytes  delta_bytes  sampled_nnz  sampled_bytes  dense_nnz  dense_bytes\n");
        for m in &self.memory {
            s.push_str(&format!(
                "{:>7} {:>6} {:>8} {:>10} {:>12} {:>12} {:>14} {:>10} {:>12}\n",
                m.n,
                m.edges,
                m.laplacian_nnz,
                m.laplacian_bytes,
                m.delta_bytes,
                m.sampled_nnz,
                m.sampled_bytes,
                m.dense_nnz,
                m.dense_bytes
            ));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_sweep_is_empty() {
        let cfg = BenchConfig {
            ns: vec![0],
            ks: vec![],
            fixed_n: 0,
            ..Default::default()
        };
        let r = run_bench(&cfg).unwrap();
        assert!(r.is_empty());
        assert_eq!(r.to_text(), "empty report\n");
    }

    #[test]
    fn byte_counters_track_nnz() {
        let m = memory_row(60, 1).unwrap();
        assert!(m.sampled_nnz < m.dense_nnz);
        assert!(m.laplacian_bytes > 0 && m.delta_bytes == 60 * 59 / 2 * 16);
    }
}
