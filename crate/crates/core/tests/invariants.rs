mod common;

use laplacegnn::augment::{bernoulli_sample, project_box_budget, sample_views, AugmentationPlan};
use laplacegnn::autodiff::Tensor;
use laplacegnn::graph::{build_adjacency, normalized_laplacian, Graph};
use laplacegnn::pairs::PairMatrix;
use laplacegnn::train::{boot_loss, pgd_update};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pair_matrix(n: usize) -> impl Strategy<Value = PairMatrix> {
    let len = n * (n - 1) / 2;
    prop::collection::vec(-0.5f64..1.5, len).prop_map(move |v| PairMatrix::full(n).with_values(v))
}

fn edge_list(n: usize) -> impl Strategy<Value = Vec<(usize, usize)>> {
    prop::collection::btree_set((0..n, 0..n), 0..3 * n).prop_map(|s| {
        let mut v: Vec<(usize, usize)> = s
            .into_iter()
            .filter(|(a, b)| a != b)
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_respects_box_and_budget(delta in pair_matrix(9), budget in 0.0f64..40.0) {
        let p = project_box_budget(&delta, budget);
        prop_assert!(p.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!(p.sum() <= budget + 1e-9);
        // already feasible input is a fixed point
        let again = project_box_budget(&p, budget);
        for (a, b) in again.values().iter().zip(p.values()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn sampling_is_binary_and_reproducible(delta in pair_matrix(8), seed in any::<u64>()) {
        let d = project_box_budget(&delta, 1e9);
        let a = bernoulli_sample(&d, 1.0, &mut ChaCha8Rng::seed_from_u64(seed));
        let b = bernoulli_sample(&d, 1.0, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(a.values(), b.values());
        for (s, p) in a.values().iter().zip(d.values()) {
            prop_assert!(*s == 0.0 || *s == 1.0);
            if *p == 0.0 { prop_assert_eq!(*s, 0.0); }
            if *p == 1.0 { prop_assert_eq!(*s, 1.0); }
        }
    }

    #[test]
    fn boot_loss_in_range(vals in prop::collection::vec(-3.0f64..3.0, 24), other in prop::collection::vec(-3.0f64..3.0, 24)) {
        let t = Tensor::from_vec(6, 4, vals);
        let z = Tensor::from_vec(6, 4, other);
        let l = boot_loss(&t, &z).unwrap();
        prop_assert!((-2.0..=2.0).contains(&l));
    }

    #[test]
    fn pgd_stays_in_ball(d in prop::collection::vec(-0.01f64..0.01, 12), g in prop::collection::vec(-5.0f64..5.0, 12), eps in 0.0f64..0.02) {
        let delta = Tensor::from_vec(3, 4, d).map(|v| v.clamp(-eps, eps));
        let out = pgd_update(&delta, &Tensor::from_vec(3, 4, g), eps, eps).unwrap();
        prop_assert!(out.amax() <= eps);
    }

    #[test]
    fn graph_and_laplacian_invariants(n in 2usize..20, edges in edge_list(20)) {
        let edges: Vec<_> = edges.into_iter().filter(|&(a, b)| a < n && b < n).collect();
        let g = Graph::from_edges(n, edges.clone()).unwrap();
        prop_assert_eq!(g.n_edges(), edges.len());
        let a = build_adjacency(&g).to_dense();
        prop_assert_eq!(&a, &a.transpose());
        prop_assert!((0..n).all(|i| a[(i, i)] == 0.0));
        let lap = normalized_laplacian(&build_adjacency(&g)).matrix.to_dense();
        prop_assert_eq!(&lap, &lap.transpose());
        let ev = common::jacobi_eigenvalues(&lap);
        prop_assert!(ev[0] > -1e-10 && ev[n - 1] < 2.0 + 1e-10);
        // isolated nodes also keep a unit diagonal
        prop_assert!((0..n).all(|i| (lap[(i, i)] - 1.0).abs() < 1e-15));
    }

    #[test]
    fn plan_text_roundtrip(delta in pair_matrix(6), seed in any::<u64>()) {
        let d = project_box_budget(&delta, 5.0);
        let plan = AugmentationPlan {
            n: 6,
            delta_max: d.clone(),
            delta_min: d.with_values(d.values().iter().map(|v| v * 0.5).collect()),
            budget: 5.0,
            budget_ratio: 0.5,
            iterations: 3,
            step: 10.0,
            k: 2,
            history_max: vec![0.1, 0.2 + seed as f64 * 1e-20],
            history_min: vec![0.05, 0.01],
            final_loss_max: 0.3,
            final_loss_min: 0.001,
        };
        let mut buf = Vec::new();
        plan.write_to(&mut buf).unwrap();
        let back = AugmentationPlan::read_from(&buf[..], "mem").unwrap();
        // zeros are dropped from the file, so compare dense contents
        for (i, j, v) in plan.delta_max.iter() {
            prop_assert_eq!(back.delta_max.get(i, j), v);
        }
        prop_assert_eq!(&back.history_max, &plan.history_max);
        let g = Graph::from_edges(6, [(0, 1), (1, 2), (3, 4)]).unwrap();
        let lap = normalized_laplacian(&build_adjacency(&g));
        let c = vec![0.5; 6];
        let v1 = sample_views(&lap, &c, &plan, seed, 1.0).unwrap();
        let v2 = sample_views(&lap, &c, &back, seed, 1.0).unwrap();
        prop_assert_eq!(v1.view1.matrix.entries(), v2.view1.matrix.entries());
        prop_assert_eq!(v1.view2.matrix.entries(), v2.view2.matrix.entries());
    }
}
