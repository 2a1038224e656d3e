use std::path::PathBuf;

use laplacegnn::augment::{self, AugmentConfig, AugmentationPlan};
use laplacegnn::centrality::{CentralityConfig, CentralityProfile, Measure};
use laplacegnn::data::{self, SbmConfig};
use laplacegnn::encoders::{EncoderKind, ModelSpec};
use laplacegnn::eval::{self, ProbeMode};
use laplacegnn::spectral;
use laplacegnn::train::{self, GraphItem, TrainConfig, TrainState};
use laplacegnn::{build_adjacency, normalized_laplacian, Error, NormalizedLaplacian};
use nalgebra::DMatrix;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        e @ (Error::Structure(_)
        | Error::Shape(_)
        | Error::Parameter { .. }
        | Error::Config { .. }
        | Error::Parse { .. }
        | Error::Protocol(_)) => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_dense(rows: &[Vec<f64>], what: &str) -> PyResult<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err(format!("{what}: rows have different lengths")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn parse_measures(names: Option<Vec<String>>) -> PyResult<CentralityConfig> {
    let mut cfg = CentralityConfig::default();
    if let Some(names) = names {
        cfg.measures = names
            .iter()
            .map(|s| Measure::parse(s).ok_or_else(|| PyValueError::new_err(format!("unknown centrality `{s}`"))))
            .collect::<PyResult<_>>()?;
    }
    Ok(cfg)
}

/// Undirected simple graph with optional node features and labels.
#[pyclass(name = "Graph", module = "laplacegnn", frozen)]
struct PyGraph {
    inner: laplacegnn::Graph,
}

#[pymethods]
impl PyGraph {
    #[new]
    #[pyo3(signature = (n_nodes, edges, features=None, labels=None))]
    fn new(
        n_nodes: usize,
        edges: Vec<(usize, usize)>,
        features: Option<Vec<Vec<f64>>>,
        labels: Option<Vec<usize>>,
    ) -> PyResult<Self> {
        let x = match features {
            Some(rows) => to_dense(&rows, "features")?,
            None => DMatrix::zeros(n_nodes, 0),
        };
        let inner = laplacegnn::Graph::new(n_nodes, edges, x, labels).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n_nodes(&self) -> usize {
        self.inner.n_nodes()
    }

    #[getter]
    fn n_edges(&self) -> usize {
        self.inner.n_edges()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().to_vec()
    }

    #[getter]
    fn labels(&self) -> Option<Vec<usize>> {
        self.inner.labels().map(<[usize]>::to_vec)
    }

    #[getter]
    fn features(&self) -> Vec<Vec<f64>> {
        to_rows(self.inner.features())
    }

    fn degrees(&self) -> Vec<usize> {
        self.inner.degrees()
    }

    /// Dense normalized Laplacian.
    fn laplacian(&self) -> Vec<Vec<f64>> {
        to_rows(&normalized_laplacian(&build_adjacency(&self.inner)).matrix.to_dense())
    }

    /// Combined centrality in [0, 1] per node.
    #[pyo3(signature = (measures=None, weights=None))]
    fn centrality(&self, measures: Option<Vec<String>>, weights: Option<Vec<f64>>) -> PyResult<Vec<f64>> {
        let mut cfg = parse_measures(measures)?;
        cfg.weights = weights;
        Ok(CentralityProfile::compute(&self.inner, &cfg).map_err(err)?.combined)
    }

    fn __repr__(&self) -> String {
        format!("Graph(n_nodes={}, n_edges={})", self.inner.n_nodes(), self.inner.n_edges())
    }
}

/// Optimized max/min augmentation matrices for one graph.
#[pyclass(name = "Plan", module = "laplacegnn", frozen)]
struct PyPlan {
    inner: AugmentationPlan,
    lap: NormalizedLaplacian,
    centrality: Vec<f64>,
}

#[pymethods]
impl PyPlan {
    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn budget(&self) -> f64 {
        self.inner.budget
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }

    #[getter]
    fn history_max(&self) -> Vec<f64> {
        self.inner.history_max.clone()
    }

    #[getter]
    fn history_min(&self) -> Vec<f64> {
        self.inner.history_min.clone()
    }

    #[getter]
    fn final_loss_max(&self) -> f64 {
        self.inner.final_loss_max
    }

    #[getter]
    fn final_loss_min(&self) -> f64 {
        self.inner.final_loss_min
    }

    /// Nonzero `(i, j, value)` entries of the max-view matrix.
    fn delta_max(&self) -> Vec<(usize, usize, f64)> {
        self.inner.delta_max.nonzeros()
    }

    fn delta_min(&self) -> Vec<(usize, usize, f64)> {
        self.inner.delta_min.nonzeros()
    }

    /// Samples both views; returns two dense Laplacians.
    #[pyo3(signature = (seed, rho=1.0))]
    fn sample_views(&self, seed: u64, rho: f64) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let v = augment::sample_views(&self.lap, &self.centrality, &self.inner, seed, rho).map_err(err)?;
        Ok((to_rows(&v.view1.matrix.to_dense()), to_rows(&v.view2.matrix.to_dense())))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        let f = std::fs::File::create(&path)?;
        self.inner.write_to(std::io::BufWriter::new(f)).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Plan(n={}, budget={}, k={})", self.inner.n, self.inner.budget, self.inner.k)
    }
}

/// Optimizes augmentation views for `graph`.
#[pyfunction]
#[pyo3(signature = (graph, budget_ratio=0.5, step=10.0, iterations=50, k=100, seed=0, measures=None))]
fn optimize_views(
    py: Python<'_>,
    graph: &PyGraph,
    budget_ratio: f64,
    step: f64,
    iterations: usize,
    k: usize,
    seed: u64,
    measures: Option<Vec<String>>,
) -> PyResult<PyPlan> {
    let ccfg = parse_measures(measures)?;
    let acfg = AugmentConfig {
        budget_ratio,
        step,
        iterations,
        k,
        seed,
        ..AugmentConfig::default()
    };
    acfg.validate().map_err(err)?;
    let g = &graph.inner;
    py.detach(|| {
        let lap = normalized_laplacian(&build_adjacency(g));
        let centrality = CentralityProfile::compute(g, &ccfg)?.combined;
        let inner = augment::optimize_views(&lap, &centrality, &acfg)?;
        Ok(PyPlan { inner, lap, centrality })
    })
    .map_err(err)
}

/// Reads a plan file written by `Plan.save` for the given graph.
#[pyfunction]
#[pyo3(signature = (graph, path, measures=None))]
fn load_plan(graph: &PyGraph, path: PathBuf, measures: Option<Vec<String>>) -> PyResult<PyPlan> {
    let f = std::fs::File::open(&path)?;
    let inner = AugmentationPlan::read_from(std::io::BufReader::new(f), &path.display().to_string()).map_err(err)?;
    let g = &graph.inner;
    if inner.n != g.n_nodes() {
        return Err(PyValueError::new_err(format!("plan has {} nodes, graph has {}", inner.n, g.n_nodes())));
    }
    let lap = normalized_laplacian(&build_adjacency(g));
    let centrality = CentralityProfile::compute(g, &parse_measures(measures)?).map_err(err)?.combined;
    Ok(PyPlan { inner, lap, centrality })
}

/// `k` smallest then `k` largest eigenvalues of a symmetric matrix, ascending.
#[pyfunction]
#[pyo3(signature = (matrix, k, tol=1e-10, max_iter=20_000))]
fn extremal_eigenvalues(matrix: Vec<Vec<f64>>, k: usize, tol: f64, max_iter: usize) -> PyResult<Vec<f64>> {
    let m = to_dense(&matrix, "matrix")?;
    if m.nrows() != m.ncols() {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    Ok(spectral::extremal_eigs(&m, k, tol, max_iter).map_err(err)?.eigenvalues)
}

/// Stochastic block model graph with block-dependent features and labels.
#[pyfunction]
#[pyo3(signature = (n, blocks=2, p_in=0.1, p_out=0.01, d_feat=16, margin=1.0, seed=0))]
fn generate_sbm(n: usize, blocks: usize, p_in: f64, p_out: f64, d_feat: usize, margin: f64, seed: u64) -> PyResult<PyGraph> {
    let cfg = SbmConfig {
        n,
        blocks,
        p_in,
        p_out,
        d_feat,
        margin,
        seed,
        ..SbmConfig::default()
    };
    let mut bundle = data::generate_sbm(&cfg).map_err(err)?;
    Ok(PyGraph {
        inner: bundle.graphs.swap_remove(0),
    })
}

/// Bootstrap loss between two row sets, `-2 * mean cosine`.
#[pyfunction]
fn boot_loss(t_hat: Vec<Vec<f64>>, z_hat: Vec<Vec<f64>>) -> PyResult<f64> {
    train::boot_loss(&to_dense(&t_hat, "t_hat")?, &to_dense(&z_hat, "z_hat")?).map_err(err)
}

/// Returns a copy of `graph` with a fraction `sigma` of its edges rewired.
#[pyfunction]
#[pyo3(signature = (graph, sigma, seed=0))]
fn random_attack(graph: &PyGraph, sigma: f64, seed: u64) -> PyResult<PyGraph> {
    let inner = eval::random_attack(&graph.inner, sigma, seed).map_err(err)?;
    Ok(PyGraph { inner })
}

/// Label-aware edge flips; `graph` must carry labels.
#[pyfunction]
#[pyo3(signature = (graph, sigma, seed=0))]
fn dice_attack(graph: &PyGraph, sigma: f64, seed: u64) -> PyResult<PyGraph> {
    let labels = graph
        .inner
        .labels()
        .ok_or_else(|| PyValueError::new_err("graph has no labels"))?;
    let inner = eval::dice_attack(&graph.inner, labels, sigma, seed).map_err(err)?;
    Ok(PyGraph { inner })
}

/// Mean and std of logistic-probe accuracy over seeded stratified splits.
#[pyfunction]
#[pyo3(signature = (embeddings, labels, train_frac=0.1, seeds=10, l2=1e-3))]
fn linear_probe(
    py: Python<'_>,
    embeddings: Vec<Vec<f64>>,
    labels: Vec<usize>,
    train_frac: f64,
    seeds: u64,
    l2: f64,
) -> PyResult<(f64, f64)> {
    let x = to_dense(&embeddings, "embeddings")?;
    let seeds: Vec<u64> = (0..seeds).collect();
    let r = py
        .detach(|| eval::seeded_probe(&x, &labels, train_frac, &seeds, l2, ProbeMode::Logistic))
        .map_err(err)?;
    Ok((r.mean, r.std))
}

/// Teacher/student encoder trained on one graph's augmentation plan.
#[pyclass(name = "Trainer", module = "laplacegnn")]
struct PyTrainer {
    state: TrainState,
    items: Vec<GraphItem>,
}

#[pymethods]
impl PyTrainer {
    #[new]
    #[pyo3(signature = (
        plan, graph, encoder="gcn", hidden=vec![64, 32], proj_hidden=64, lr=1e-3,
        eps=0.008, ema_decay=0.99, accum_steps=1, seed=0
    ))]
    fn new(
        plan: &PyPlan,
        graph: &PyGraph,
        encoder: &str,
        hidden: Vec<usize>,
        proj_hidden: usize,
        lr: f64,
        eps: f64,
        ema_decay: f64,
        accum_steps: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let kind = EncoderKind::parse(encoder).ok_or_else(|| PyValueError::new_err(format!("unknown encoder `{encoder}`")))?;
        if plan.inner.n != graph.inner.n_nodes() {
            return Err(PyValueError::new_err("plan and graph sizes differ"));
        }
        let spec = ModelSpec {
            kind,
            in_dim: graph.inner.features().ncols(),
            hidden,
            proj_hidden,
        };
        spec.validate().map_err(err)?;
        let cfg = TrainConfig {
            lr,
            eps,
            ema_decay,
            accum_steps,
            seed,
            ..TrainConfig::default()
        };
        let state = TrainState::new(spec, cfg).map_err(err)?;
        let items = vec![GraphItem {
            lap: plan.lap.clone(),
            centrality: plan.centrality.clone(),
            plan: plan.inner.clone(),
            features: graph.inner.features().clone(),
        }];
        Ok(Self { state, items })
    }

    #[getter]
    fn epoch(&self) -> usize {
        self.state.epoch
    }

    /// Runs `epochs` epochs and returns their losses.
    #[pyo3(signature = (epochs=1))]
    fn train(&mut self, py: Python<'_>, epochs: usize) -> PyResult<Vec<f64>> {
        let (state, items) = (&mut self.state, &self.items);
        py.detach(|| (0..epochs).map(|_| state.train_epoch(items).map(|m| m.loss)).collect::<laplacegnn::Result<Vec<f64>>>())
            .map_err(err)
    }

    /// Student encoder output, one row per node.
    fn embed(&self, py: Python<'_>) -> PyResult<Vec<Vec<f64>>> {
        let e = py.detach(|| self.state.embed(&self.items)).map_err(err)?;
        Ok(to_rows(&e))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.state.save(&path).map_err(err)
    }

    /// Replaces the model state with a checkpoint trained on the same layout.
    fn load(&mut self, path: PathBuf) -> PyResult<()> {
        let state = TrainState::load(&path).map_err(err)?;
        if state.spec != self.state.spec {
            return Err(PyValueError::new_err("checkpoint model does not match this trainer"));
        }
        self.state = state;
        Ok(())
    }
}

#[pymodule(name = "laplacegnn")]
fn laplacegnn_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyPlan>()?;
    m.add_class::<PyTrainer>()?;
    m.add_function(wrap_pyfunction!(optimize_views, m)?)?;
    m.add_function(wrap_pyfunction!(load_plan, m)?)?;
    m.add_function(wrap_pyfunction!(extremal_eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(generate_sbm, m)?)?;
    m.add_function(wrap_pyfunction!(boot_loss, m)?)?;
    m.add_function(wrap_pyfunction!(random_attack, m)?)?;
    m.add_function(wrap_pyfunction!(dice_attack, m)?)?;
    m.add_function(wrap_pyfunction!(linear_probe, m)?)?;
    Ok(())
}
