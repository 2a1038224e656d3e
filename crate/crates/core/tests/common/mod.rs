#![allow(dead_code)]

use laplacegnn::autodiff::{Tape, Tensor, Var};
use laplacegnn::graph::Graph;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Cyclic Jacobi rotations; returns eigenvalues in ascending order.
pub fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    let scale = a.norm().max(1e-300);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut d: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    d.sort_by(f64::total_cmp);
    d
}

/// `k` lowest then `k` highest, ascending.
pub fn extremal_from_oracle(m: &DMatrix<f64>, k: usize) -> Vec<f64> {
    let all = jacobi_eigenvalues(m);
    let n = all.len();
    all[..k].iter().chain(&all[n - k..]).copied().collect()
}

pub fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    (&a + a.transpose()) * 0.5
}

pub fn random_graph(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Graph::from_edges(n, edges).unwrap()
}

pub fn random_tensor(r: usize, c: usize, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

/// Entries pushed at least `gap` away from zero, so kinks stay out of
/// finite-difference reach.
pub fn away_from_zero(t: Tensor, gap: f64) -> Tensor {
    t.map(|v| if v.abs() < gap { v.signum() * gap + v } else { v })
}

/// Worst relative error between the tape's gradient and central finite
/// differences of `sum_t a_t^T f(inputs) w_t` over every input entry.
///
/// The error of each input is `max |fd - g| / max(max |g|, 1e-6)`.
pub fn vjp_error<'s, F>(inputs: &[Tensor], seed: u64, f: F) -> f64
where
    F: Fn(&mut Tape<'s>, &[Var]) -> Var,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|x| tape.param(x.clone())).collect();
        let y = f(&mut tape, &vars);
        tape.value(y).shape()
    };
    let probes: Vec<(Tensor, Tensor)> = (0..3)
        .map(|_| (random_tensor(1, shape.0, &mut rng), random_tensor(shape.1, 1, &mut rng)))
        .collect();

    let contract = |tape: &mut Tape<'s>, y: Var| -> Var {
        let mut acc: Option<Var> = None;
        for (a, w) in &probes {
            let av = tape.constant(a.clone());
            let wv = tape.constant(w.clone());
            let ay = tape.matmul(av, y).unwrap();
            let s = tape.matmul(ay, wv).unwrap();
            acc = Some(match acc {
                None => s,
                Some(prev) => tape.add(prev, s).unwrap(),
            });
        }
        acc.unwrap()
    };
    let eval = |xs: &[Tensor]| -> f64 {
        let mut tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|x| tape.constant(x.clone())).collect();
        let y = f(&mut tape, &vars);
        let s = contract(&mut tape, y);
        tape.value(s)[(0, 0)]
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|x| tape.param(x.clone())).collect();
    let y = f(&mut tape, &vars);
    let s = contract(&mut tape, y);
    let grads = tape.backward(s).unwrap();

    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (idx, v) in vars.iter().enumerate() {
        let g = grads.get(*v).unwrap();
        let mut fd = Tensor::zeros(g.nrows(), g.ncols());
        for e in 0..g.len() {
            let mut plus = inputs.to_vec();
            plus[idx][e] += h;
            let mut minus = inputs.to_vec();
            minus[idx][e] -= h;
            fd[e] = (eval(&plus) - eval(&minus)) / (2.0 * h);
        }
        let diff = (&fd - g).amax();
        worst = worst.max(diff / g.amax().max(1e-6));
    }
    worst
}

/// Worst VJP error of every tape primitive over `trials` random draws.
pub fn primitive_vjp_errors(trials: u64) -> Vec<(&'static str, f64)> {
    use laplacegnn::graph::SparseSym;
    let names = [
        "matmul",
        "sparse_matmul",
        "add",
        "add_row_bias",
        "scale",
        "relu",
        "prelu_scalar",
        "prelu_channel",
        "row_l2_normalize",
        "mean_all",
        "sum_rows",
        "cosine_rows",
    ];
    let mut out: Vec<(&'static str, f64)> = names.iter().map(|&n| (n, 0.0)).collect();
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial);
        let r = rng.random_range(2..7);
        let c = rng.random_range(2..6);
        let m = rng.random_range(2..5);
        let x = random_tensor(r, c, &mut rng);
        let x2 = random_tensor(r, c, &mut rng);
        let w = random_tensor(c, m, &mut rng);
        let bias = random_tensor(1, c, &mut rng);
        let kinked = away_from_zero(x.clone(), 1e-3);
        let slope1 = random_tensor(1, 1, &mut rng);
        let slope_c = random_tensor(1, c, &mut rng);
        let mut trip = Vec::new();
        for i in 0..r {
            for j in 0..=i {
                if i == j || rng.random::<f64>() < 0.5 {
                    trip.push((i, j, rng.random_range(-1.0..1.0)));
                }
            }
        }
        let s = SparseSym::from_triplets(r, trip).unwrap();
        let seed = 77 + trial;
        let errs = [
            vjp_error(&[x.clone(), w.clone()], seed, |t, v| t.matmul(v[0], v[1]).unwrap()),
            vjp_error(&[x.clone()], seed, |t, v| t.sparse_matmul(&s, v[0]).unwrap()),
            vjp_error(&[x.clone(), x2.clone()], seed, |t, v| t.add(v[0], v[1]).unwrap()),
            vjp_error(&[x.clone(), bias.clone()], seed, |t, v| t.add_row_bias(v[0], v[1]).unwrap()),
            vjp_error(&[x.clone()], seed, |t, v| t.scale(v[0], -1.7)),
            vjp_error(&[kinked.clone()], seed, |t, v| t.relu(v[0])),
            vjp_error(&[kinked.clone(), slope1.clone()], seed, |t, v| t.prelu(v[0], v[1]).unwrap()),
            vjp_error(&[kinked.clone(), slope_c.clone()], seed, |t, v| t.prelu(v[0], v[1]).unwrap()),
            vjp_error(&[x.clone()], seed, |t, v| t.row_l2_normalize(v[0])),
            vjp_error(&[x.clone()], seed, |t, v| t.mean_all(v[0])),
            vjp_error(&[x.clone()], seed, |t, v| t.sum_rows(v[0])),
            vjp_error(&[x.clone(), x2.clone()], seed, |t, v| t.cosine_rows(v[0], v[1]).unwrap()),
        ];
        for (slot, e) in out.iter_mut().zip(errs) {
            slot.1 = slot.1.max(e);
        }
    }
    out
}

/// Analytic spectral gradient against central differences on one random
/// instance with `n <= 16`. `None` when the spectrum is degenerate near the
/// selected eigenvalues.
pub fn spectral_grad_error(seed: u64) -> Option<f64> {
    use laplacegnn::graph::{build_adjacency, normalized_laplacian};
    use laplacegnn::pairs::PairMatrix;
    use laplacegnn::spectral::{build_modified_laplacian, extremal_eigs, spectral_loss_grad, SpectralSummary};

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(6..=16);
    let g = random_graph(n, 0.35, &mut rng);
    let lap = normalized_laplacian(&build_adjacency(&g));
    let c: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let support = PairMatrix::full(n);
    let delta = support.with_values((0..support.len()).map(|_| rng.random_range(0.0..1.0)).collect());
    let k = rng.random_range(1..=3.min(n / 2));

    let dense_m = build_modified_laplacian(&lap, &c, &delta).unwrap().to_dense();
    let all = jacobi_eigenvalues(&dense_m);
    let gaps_ok = |i: usize| all[i + 1] - all[i] > 1e-6;
    if !gaps_ok(k - 1) || !gaps_ok(n - k - 1) {
        return None;
    }
    let m_sparse = build_modified_laplacian(&lap, &c, &delta).unwrap();
    let summary = extremal_eigs(&m_sparse, k, 1e-12, 20000).unwrap();
    let orig = SpectralSummary::from_values(extremal_from_oracle(&lap.matrix.to_dense(), k));
    let grad = spectral_loss_grad(&lap, &c, &delta, &summary, &orig).unwrap();
    if grad.degenerate_clusters > 0 {
        return None;
    }
    let loss = |d: &PairMatrix| -> f64 {
        let m = build_modified_laplacian(&lap, &c, d).unwrap().to_dense();
        let ev = extremal_from_oracle(&m, k);
        ev.iter().zip(&orig.eigenvalues).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (2 * k) as f64
    };
    let h = 1e-5;
    let mut worst_diff: f64 = 0.0;
    let gmax = grad.grad.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for p in 0..delta.len() {
        let mut plus = delta.clone();
        plus.values_mut()[p] += h;
        let mut minus = delta.clone();
        minus.values_mut()[p] -= h;
        let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
        worst_diff = worst_diff.max((fd - grad.grad.values()[p]).abs());
    }
    Some(worst_diff / gmax.max(1e-12))
}
