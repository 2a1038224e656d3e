mod common;

use common::*;
use laplacegnn::encoders::{gcn_forward, gin_forward, init_encoder, ModelSpec};
use laplacegnn::graph::{build_adjacency, normalized_laplacian, Graph};
use laplacegnn::spectral::extremal_eigs_seeded;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

#[test]
fn jacobi_oracle_agrees_with_nalgebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let m = random_symmetric(12, &mut rng);
    let mut ours = m.clone().symmetric_eigen().eigenvalues.as_slice().to_vec();
    ours.sort_by(f64::total_cmp);
    for (a, b) in jacobi_eigenvalues(&m).iter().zip(&ours) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn lanczos_matches_jacobi() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..12 {
        let n = rng.random_range(12..=64);
        let m = random_symmetric(n, &mut rng);
        for k in [1, 2, 5] {
            let s = extremal_eigs_seeded(&m, k, 1e-10, 50_000, trial).unwrap();
            let want = extremal_from_oracle(&m, k);
            for (a, b) in s.eigenvalues.iter().zip(&want) {
                assert!((a - b).abs() <= 1e-8, "n {n} k {k}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn lanczos_on_graph_laplacian() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = random_graph(80, 0.08, &mut rng);
    let lap = normalized_laplacian(&build_adjacency(&g));
    let s = extremal_eigs_seeded(&lap.matrix, 4, 1e-10, 50_000, 1).unwrap();
    let want = extremal_from_oracle(&lap.matrix.to_dense(), 4);
    for (a, b) in s.eigenvalues.iter().zip(&want) {
        assert!((a - b).abs() <= 1e-8);
    }
    assert!(s.eigenvalues[0].abs() < 1e-8);
    assert!(*s.eigenvalues.last().unwrap() <= 2.0 + 1e-10);
}

#[test]
fn spectral_gradient_finite_differences() {
    let mut checked = 0;
    for seed in 0..10 {
        if let Some(err) = spectral_grad_error(seed) {
            assert!(err <= 1e-4, "seed {seed}: relative error {err}");
            checked += 1;
        }
    }
    assert!(checked >= 5);
}

#[test]
fn tape_primitives_finite_differences() {
    for (name, err) in primitive_vjp_errors(4) {
        assert!(err <= 1e-4, "{name}: {err}");
    }
}

fn permuted(g: &Graph, perm: &[usize]) -> Graph {
    let x = g.features();
    let mut px = DMatrix::zeros(x.nrows(), x.ncols());
    for (old, &new) in perm.iter().enumerate() {
        px.set_row(new, &x.row(old));
    }
    let edges = g.edges().iter().map(|&(a, b)| (perm[a], perm[b]));
    Graph::new(g.n_nodes(), edges, px, None).unwrap()
}

fn featured_graph(n: usize, d: usize, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = random_graph(n, 0.3, &mut rng);
    let x = random_tensor(n, d, &mut rng);
    Graph::new(n, base.edges().to_vec(), x, None).unwrap()
}

#[test]
fn gcn_is_permutation_equivariant() {
    let g = featured_graph(15, 4, 1);
    let mut perm: Vec<usize> = (0..15).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(2));
    let pg = permuted(&g, &perm);
    let spec = ModelSpec {
        hidden: vec![8, 6],
        proj_hidden: 8,
        ..ModelSpec::gcn(4)
    };
    let params = init_encoder(&spec, 9).unwrap();
    let h = gcn_forward(&normalized_laplacian(&build_adjacency(&g)), g.features(), &spec, &params).unwrap();
    let ph = gcn_forward(&normalized_laplacian(&build_adjacency(&pg)), pg.features(), &spec, &params).unwrap();
    for (old, &new) in perm.iter().enumerate() {
        assert!((h.row(old) - ph.row(new)).amax() < 1e-12);
    }
}

#[test]
fn gin_readout_is_permutation_invariant() {
    let g = featured_graph(12, 3, 4);
    let mut perm: Vec<usize> = (0..12).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(8));
    let pg = permuted(&g, &perm);
    let spec = ModelSpec {
        hidden: vec![8, 8],
        proj_hidden: 8,
        ..ModelSpec::gin(3)
    };
    let params = init_encoder(&spec, 2).unwrap();
    let (l, pl) = (
        normalized_laplacian(&build_adjacency(&g)),
        normalized_laplacian(&build_adjacency(&pg)),
    );
    let a = gin_forward(&[(&l, g.features())], &spec, &params).unwrap();
    let b = gin_forward(&[(&pl, pg.features())], &spec, &params).unwrap();
    assert!((a - b).amax() < 1e-10);
}
