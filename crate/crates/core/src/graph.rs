//! Sparse undirected graphs, symmetric sparse matrices and the normalized
//! Laplacian `I - D^{-1/2} A D^{-1/2}`.

use std::collections::HashSet;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Undirected simple graph with a dense node-feature matrix.
///
/// Edges are stored once per pair as `(min, max)` and kept sorted, so
/// iteration order is deterministic.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
    features: DMatrix<f64>,
    labels: Option<Vec<usize>>,
}

impl Graph {
    /// Builds a graph, rejecting self-loops, duplicates and out-of-range
    /// endpoints. `features` must have one row per node.
    pub fn new(
        n_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        features: DMatrix<f64>,
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        let mut canon = Vec::new();
        for (a, b) in edges {
            if a >= n_nodes || b >= n_nodes {
                return Err(Error::Structure(format!(
                    "edge ({a}, {b}) out of range for {n_nodes} nodes"
                )));
            }
            if a == b {
                return Err(Error::Structure(format!("self-loop on node {a}")));
            }
            canon.push((a.min(b), a.max(b)));
        }
        canon.sort_unstable();
        let before = canon.len();
        canon.dedup();
        if canon.len() != before {
            return Err(Error::Structure("duplicate edges".into()));
        }
        if features.nrows() != n_nodes {
            return Err(Error::Structure(format!(
                "feature matrix has {} rows, graph has {n_nodes} nodes",
                features.nrows()
            )));
        }
        if let Some(l) = &labels {
            if l.len() != n_nodes {
                return Err(Error::Structure(format!(
                    "{} labels for {n_nodes} nodes",
                    l.len()
                )));
            }
        }
        Ok(Self {
            n_nodes,
            edges: canon,
            features,
            labels,
        })
    }

    /// Graph without features (zero feature columns) or labels.
    pub fn from_edges(n_nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        Self::new(n_nodes, edges, DMatrix::zeros(n_nodes, 0), None)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Canonical `(min, max)` edge list in sorted order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn with_labels(mut self, labels: Option<Vec<usize>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != self.n_nodes {
                return Err(Error::Structure(format!(
                    "{} labels for {} nodes",
                    l.len(),
                    self.n_nodes
                )));
            }
        }
        self.labels = labels;
        Ok(self)
    }

    /// Same nodes, features and labels with a different edge set.
    pub fn with_edges(&self, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        Self::new(
            self.n_nodes,
            edges,
            self.features.clone(),
            self.labels.clone(),
        )
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_nodes];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    /// Sorted neighbor lists.
    pub fn adjacency_lists(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_nodes];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn edge_set(&self) -> HashSet<(usize, usize)> {
        self.edges.iter().copied().collect()
    }
}

/// Real symmetric sparse matrix stored as its lower triangle plus diagonal.
///
/// Entries are unique, sorted by `(row, col)` with `row >= col`. Because only
/// one triangle exists, the materialized matrix is symmetric bit-for-bit.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSym {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseSym {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            entries: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            entries: (0..n).map(|i| (i, i, 1.0)).collect(),
        }
    }

    /// Builds from arbitrary `(row, col, value)` triplets. Upper-triangle
    /// triplets are mirrored into the lower triangle and duplicates summed.
    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (r, c, v) in triplets {
            if r >= n || c >= n {
                return Err(Error::Structure(format!(
                    "entry ({r}, {c}) out of range for dimension {n}"
                )));
            }
            entries.push((r.max(c), r.min(c), v));
        }
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        Ok(Self { n, entries: merged })
    }

    /// Lower triangle of a dense matrix, skipping exact zeros.
    pub fn from_dense_lower(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        let mut entries = Vec::new();
        for r in 0..n {
            for c in 0..=r {
                let v = m[(r, c)];
                if v != 0.0 {
                    entries.push((r, c, v));
                }
            }
        }
        Self { n, entries }
    }

    /// Caller guarantees sorted, unique, lower-triangle entries.
    pub(crate) fn from_sorted_lower(n: usize, entries: Vec<(usize, usize, f64)>) -> Self {
        debug_assert!(entries.windows(2).all(|w| (w[0].0, w[0].1) < (w[1].0, w[1].1)));
        debug_assert!(entries.iter().all(|&(r, c, _)| r >= c && r < n));
        Self { n, entries }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored (lower + diagonal) entries.
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn nnz_stored(&self) -> usize {
        self.entries.len()
    }

    /// Nonzeros of the full symmetric matrix.
    pub fn nnz(&self) -> usize {
        self.entries
            .iter()
            .map(|&(r, c, _)| if r == c { 1 } else { 2 })
            .sum()
    }

    /// Bytes held by the coordinate list.
    pub fn bytes(&self) -> usize {
        self.entries.len() * std::mem::size_of::<(usize, usize, f64)>()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let key = (i.max(j), i.min(j));
        self.entries
            .binary_search_by(|e| (e.0, e.1).cmp(&key))
            .map(|idx| self.entries[idx].2)
            .unwrap_or(0.0)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for &(r, c, v) in &self.entries {
            if r == c {
                d[r] = v;
            }
        }
        d
    }

    /// `y = M x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.iter_mut().for_each(|v| *v = 0.0);
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
            if r != c {
                y[c] += v * x[r];
            }
        }
    }

    /// `M X` for a dense right-hand side.
    pub fn mul_dense(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.nrows() != self.n {
            return Err(Error::Shape(format!(
                "sparse {}x{} times dense {}x{}",
                self.n,
                self.n,
                x.nrows(),
                x.ncols()
            )));
        }
        let mut out = DMatrix::zeros(self.n, x.ncols());
        for k in 0..x.ncols() {
            let xc = x.column(k);
            let mut yc = out.column_mut(k);
            for &(r, c, v) in &self.entries {
                yc[r] += v * xc[c];
                if r != c {
                    yc[c] += v * xc[r];
                }
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for &(r, c, v) in &self.entries {
            m[(r, c)] = v;
            m[(c, r)] = v;
        }
        m
    }

    /// `I - M`, dropping entries that cancel exactly.
    pub fn identity_minus(&self) -> SparseSym {
        let mut out = Vec::with_capacity(self.entries.len() + self.n);
        let mut it = self.entries.iter().peekable();
        for r in 0..self.n {
            let mut has_diag = false;
            while let Some(&&(er, ec, v)) = it.peek() {
                if er != r {
                    break;
                }
                has_diag |= er == ec;
                let val = if er == ec { 1.0 - v } else { -v };
                if val != 0.0 {
                    out.push((er, ec, val));
                }
                it.next();
            }
            if !has_diag {
                out.push((r, r, 1.0));
            }
        }
        SparseSym::from_sorted_lower(self.n, out)
    }

    /// Full (both triangles) compressed-row form.
    pub(crate) fn to_csr(&self) -> Csr {
        let mut counts = vec![0usize; self.n + 1];
        for &(r, c, _) in &self.entries {
            counts[r + 1] += 1;
            if r != c {
                counts[c + 1] += 1;
            }
        }
        for i in 0..self.n {
            counts[i + 1] += counts[i];
        }
        let nnz = counts[self.n];
        let mut indices = vec![0usize; nnz];
        let mut values = vec![0.0; nnz];
        let mut next = counts.clone();
        // entries are row-major over the lower triangle, so upper-triangle
        // mirrors land in increasing column order as well
        for &(r, c, v) in &self.entries {
            if r != c {
                let p = next[c];
                indices[p] = r;
                values[p] = v;
                next[c] += 1;
            }
            let p = next[r];
            indices[p] = c;
            values[p] = v;
            next[r] += 1;
        }
        let mut csr = Csr {
            n_rows: self.n,
            n_cols: self.n,
            indptr: counts,
            indices,
            values,
        };
        csr.sort_rows();
        csr
    }
}

/// Compressed sparse rows; internal helper for sparse products.
#[derive(Clone, Debug)]
pub(crate) struct Csr {
    pub n_rows: usize,
    pub n_cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    fn sort_rows(&mut self) {
        for i in 0..self.n_rows {
            let (a, b) = (self.indptr[i], self.indptr[i + 1]);
            if self.indices[a..b].windows(2).all(|w| w[0] < w[1]) {
                continue;
            }
            let mut pairs: Vec<(usize, f64)> = self.indices[a..b]
                .iter()
                .copied()
                .zip(self.values[a..b].iter().copied())
                .collect();
            pairs.sort_by_key(|p| p.0);
            for (k, (j, v)) in pairs.into_iter().enumerate() {
                self.indices[a + k] = j;
                self.values[a + k] = v;
            }
        }
    }

    /// Sparse product via a dense row accumulator.
    pub fn matmul(&self, other: &Csr) -> Csr {
        assert_eq!(self.n_cols, other.n_rows);
        let mut acc = vec![0.0; other.n_cols];
        let mut seen = vec![false; other.n_cols];
        let mut touched = Vec::new();
        let mut indptr = vec![0usize];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&k, &a) in cols.iter().zip(vals) {
                let (ocols, ovals) = other.row(k);
                for (&j, &b) in ocols.iter().zip(ovals) {
                    if !seen[j] {
                        seen[j] = true;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                indices.push(j);
                values.push(acc[j]);
                acc[j] = 0.0;
                seen[j] = false;
            }
            touched.clear();
            indptr.push(indices.len());
        }
        Csr {
            n_rows: self.n_rows,
            n_cols: other.n_cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn transpose(&self) -> Csr {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &j in &self.indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.n_cols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut indices = vec![0usize; self.indices.len()];
        let mut values = vec![0.0; self.values.len()];
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let p = next[j];
                indices[p] = i;
                values[p] = v;
                next[j] += 1;
            }
        }
        Csr {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            indptr: counts,
            indices,
            values,
        }
    }
}

/// Normalized Laplacian `L = I - D^{-1/2} A D^{-1/2}`.
///
/// Isolated nodes get `D^{-1/2}_ii = 0`, so their row is zero off the
/// diagonal and the diagonal entry is 1.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedLaplacian {
    pub matrix: SparseSym,
    pub degree_root_inv: Vec<f64>,
}

impl NormalizedLaplacian {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// Propagation operator `I - L`.
    pub fn propagation(&self) -> SparseSym {
        self.matrix.identity_minus()
    }
}

/// Binary symmetric adjacency with zero diagonal.
pub fn build_adjacency(g: &Graph) -> SparseSym {
    let entries = g.edges().iter().map(|&(a, b)| (b, a, 1.0)).collect::<Vec<_>>();
    let mut entries = entries;
    entries.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
    SparseSym::from_sorted_lower(g.n_nodes(), entries)
}

pub fn normalized_laplacian(a: &SparseSym) -> NormalizedLaplacian {
    let n = a.dim();
    let mut degree = vec![0.0; n];
    for &(r, c, v) in a.entries() {
        degree[r] += v;
        if r != c {
            degree[c] += v;
        }
    }
    let dinv: Vec<f64> = degree
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let mut entries = Vec::with_capacity(a.nnz_stored() + n);
    let mut it = a.entries().iter().peekable();
    for r in 0..n {
        let mut diag = 1.0;
        while let Some(&&(er, ec, v)) = it.peek() {
            if er != r {
                break;
            }
            if ec == er {
                diag -= dinv[r] * dinv[r] * v;
            } else {
                let w = -dinv[er] * dinv[ec] * v;
                if w != 0.0 {
                    entries.push((er, ec, w));
                }
            }
            it.next();
        }
        entries.push((r, r, diag));
    }
    NormalizedLaplacian {
        matrix: SparseSym::from_sorted_lower(n, entries),
        degree_root_inv: dinv,
    }
}
