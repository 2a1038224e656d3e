//! Glue from graphs to training items: centrality, plan, features.

use crate::augment::{optimize_views, AugmentConfig, AugmentationPlan};
use crate::centrality::{CentralityConfig, CentralityProfile};
use crate::data::DatasetBundle;
use crate::error::Result;
use crate::graph::{build_adjacency, normalized_laplacian, Graph};
use crate::train::{mix_seed, GraphItem};

/// Centrality and optimized plan for one graph.
pub fn prepare_graph(g: &Graph, ccfg: &CentralityConfig, acfg: &AugmentConfig) -> Result<GraphItem> {
    let lap = normalized_laplacian(&build_adjacency(g));
    let profile = CentralityProfile::compute(g, ccfg)?;
    let plan = optimize_views(&lap, &profile.combined, acfg)?;
    Ok(GraphItem {
        lap,
        centrality: profile.combined,
        plan,
        features: g.features().clone(),
    })
}

/// Rebuilds an item from a stored plan.
pub fn item_with_plan(g: &Graph, ccfg: &CentralityConfig, plan: AugmentationPlan) -> Result<GraphItem> {
    let lap = normalized_laplacian(&build_adjacency(g));
    let profile = CentralityProfile::compute(g, ccfg)?;
    Ok(GraphItem {
        lap,
        centrality: profile.combined,
        plan,
        features: g.features().clone(),
    })
}

/// Prepares every graph of a bundle, optimizing plans on `workers` threads.
///
/// Graph `i` uses augmentation seed `mix(acfg.seed, i)`, so results do not
/// depend on the worker count.
pub fn prepare_bundle(
    bundle: &DatasetBundle,
    ccfg: &CentralityConfig,
    acfg: &AugmentConfig,
    workers: usize,
) -> Result<Vec<GraphItem>> {
    let graphs = &bundle.graphs;
    let workers = workers.clamp(1, graphs.len().max(1));
    let mut slots: Vec<Option<Result<GraphItem>>> = (0..graphs.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        let chunk = graphs.len().div_ceil(workers).max(1);
        for (ci, out) in slots.chunks_mut(chunk).enumerate() {
            s.spawn(move || {
                for (k, slot) in out.iter_mut().enumerate() {
                    let i = ci * chunk + k;
                    let cfg = AugmentConfig {
                        seed: graph_seed(acfg.seed, i, graphs.len()),
                        ..acfg.clone()
                    };
                    *slot = Some(prepare_graph(&graphs[i], ccfg, &cfg));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("every slot filled")).collect()
}

/// A single graph keeps the configured seed; graph sets get derived seeds.
pub fn graph_seed(seed: u64, index: usize, count: usize) -> u64 {
    if count == 1 {
        seed
    } else {
        mix_seed(seed, 3, index as u64)
    }
}
