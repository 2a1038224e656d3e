//! Text dataset formats and synthetic stochastic block models.
//!
//! Files:
//! - edges: two whitespace-separated node ids per line, `#` starts a comment
//! - features: comma-separated reals without header, row `i` is node `i`
//! - labels: one non-negative integer per line (per node, or per graph
//!   when a graph indicator is given)
//! - splits: `[name]` section headers followed by whitespace-separated indices
//! - graph indicator: one graph id per node line, ids contiguous from 0

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    NodeClassification,
    GraphClassification,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::NodeClassification => "node",
            Task::GraphClassification => "graph",
        }
    }
}

/// One or more validated graphs with their task and index splits.
///
/// For node tasks there is a single graph carrying node labels and the
/// splits index its nodes. For graph tasks `graph_labels` holds one label
/// per graph and the splits index graphs.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetBundle {
    pub graphs: Vec<Graph>,
    pub task: Task,
    pub graph_labels: Option<Vec<usize>>,
    pub splits: BTreeMap<String, Vec<usize>>,
}

impl DatasetBundle {
    pub fn new(
        graphs: Vec<Graph>,
        task: Task,
        graph_labels: Option<Vec<usize>>,
        splits: BTreeMap<String, Vec<usize>>,
    ) -> Result<Self> {
        let b = Self {
            graphs,
            task,
            graph_labels,
            splits,
        };
        b.validate()?;
        Ok(b)
    }

    /// Number of indexable items: nodes for node tasks, graphs otherwise.
    pub fn n_items(&self) -> usize {
        match self.task {
            Task::NodeClassification => self.graphs.first().map_or(0, |g| g.n_nodes()),
            Task::GraphClassification => self.graphs.len(),
        }
    }

    /// Labels of the indexable items.
    pub fn labels(&self) -> Option<&[usize]> {
        match self.task {
            Task::NodeClassification => self.graphs.first().and_then(|g| g.labels()),
            Task::GraphClassification => self.graph_labels.as_deref(),
        }
    }

    pub fn split(&self, name: &str) -> Option<&[usize]> {
        self.splits.get(name).map(|v| v.as_slice())
    }

    pub fn validate(&self) -> Result<()> {
        match self.task {
            Task::NodeClassification => {
                if self.graphs.len() != 1 {
                    return Err(Error::Structure(format!(
                        "node task needs exactly one graph, got {}",
                        self.graphs.len()
                    )));
                }
            }
            Task::GraphClassification => {
                let n = self.graph_labels.as_ref().map(|l| l.len());
                if n.is_some_and(|n| n != self.graphs.len()) {
                    return Err(Error::Structure(format!(
                        "{} graph labels for {} graphs",
                        n.unwrap_or(0),
                        self.graphs.len()
                    )));
                }
                let d: HashSet<usize> = self.graphs.iter().map(|g| g.features().ncols()).collect();
                if d.len() > 1 {
                    return Err(Error::Structure("graphs disagree on feature width".into()));
                }
            }
        }
        let n = self.n_items();
        let mut seen = HashSet::new();
        for (name, idx) in &self.splits {
            for &i in idx {
                if i >= n {
                    return Err(Error::Structure(format!("split `{name}` index {i} out of range for {n} items")));
                }
                if !seen.insert(i) {
                    return Err(Error::Structure(format!("index {i} appears in more than one split")));
                }
            }
        }
        Ok(())
    }
}

/// Input file locations.
#[derive(Clone, Debug, Default)]
pub struct DatasetPaths {
    pub edges: PathBuf,
    pub features: PathBuf,
    pub labels: Option<PathBuf>,
    pub splits: Option<PathBuf>,
    pub graph_indicator: Option<PathBuf>,
}

impl DatasetPaths {
    /// Conventional file names inside `dir`; optional files only if present.
    pub fn in_dir(dir: &Path) -> Self {
        let opt = |name: &str| Some(dir.join(name)).filter(|p| p.exists());
        Self {
            edges: dir.join("edges.txt"),
            features: dir.join("features.csv"),
            labels: opt("labels.txt"),
            splits: opt("splits.txt"),
            graph_indicator: opt("graph_indicator.txt"),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: 0,
        msg: e.to_string(),
    })
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Content lines with their 1-based numbers; `#` comments and blanks dropped.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

pub fn read_edges(path: &Path) -> Result<Vec<(usize, usize)>> {
    let text = read(path)?;
    let mut out = Vec::new();
    for (no, l) in content_lines(&text) {
        let t: Vec<&str> = l.split_whitespace().collect();
        let [a, b] = t.as_slice() else {
            return Err(parse_err(path, no, format!("expected two node ids, got `{l}`")));
        };
        let a = a.parse().map_err(|_| parse_err(path, no, format!("bad node id `{a}`")))?;
        let b = b.parse().map_err(|_| parse_err(path, no, format!("bad node id `{b}`")))?;
        out.push((a, b));
    }
    Ok(out)
}

pub fn read_features(path: &Path) -> Result<DMatrix<f64>> {
    let text = read(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (no, l) in content_lines(&text) {
        let row = l
            .split(',')
            .map(|t| {
                let t = t.trim();
                t.parse::<f64>().map_err(|_| parse_err(path, no, format!("bad number `{t}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(
                    path,
                    no,
                    format!("{} columns, expected {}", row.len(), first.len()),
                ));
            }
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(parse_err(path, no, "non-finite feature"));
        }
        rows.push(row);
    }
    let d = rows.first().map_or(0, |r| r.len());
    Ok(DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]))
}

fn read_indices(path: &Path) -> Result<Vec<usize>> {
    let text = read(path)?;
    content_lines(&text)
        .map(|(no, l)| l.parse().map_err(|_| parse_err(path, no, format!("bad integer `{l}`"))))
        .collect()
}

pub fn read_splits(path: &Path) -> Result<BTreeMap<String, Vec<usize>>> {
    let text = read(path)?;
    let mut out: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (no, l) in content_lines(&text) {
        if let Some(name) = l.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            let name = name.trim().to_string();
            if out.contains_key(&name) {
                return Err(parse_err(path, no, format!("split `{name}` defined twice")));
            }
            out.insert(name.clone(), Vec::new());
            current = Some(name);
            continue;
        }
        let Some(name) = &current else {
            return Err(parse_err(path, no, "indices before any `[name]` section"));
        };
        let bucket = out.get_mut(name).expect("section exists");
        for t in l.split_whitespace() {
            bucket.push(t.parse().map_err(|_| parse_err(path, no, format!("bad index `{t}`")))?);
        }
    }
    Ok(out)
}

/// Loads and validates a bundle, returning dedup/self-loop warnings as well.
pub fn load_edgelist_reported(paths: &DatasetPaths) -> Result<(DatasetBundle, Vec<String>)> {
    let features = read_features(&paths.features)?;
    let n = features.nrows();
    let raw_edges = read_edges(&paths.edges)?;
    let mut warnings = Vec::new();
    let mut seen = HashSet::new();
    let mut edges = Vec::with_capacity(raw_edges.len());
    let (mut dups, mut loops) = (0usize, 0usize);
    for (a, b) in raw_edges {
        if a >= n || b >= n {
            return Err(Error::Structure(format!(
                "edge ({a}, {b}) references a node beyond the {n} feature rows"
            )));
        }
        if a == b {
            loops += 1;
            continue;
        }
        if seen.insert((a.min(b), a.max(b))) {
            edges.push((a, b));
        } else {
            dups += 1;
        }
    }
    if dups > 0 {
        warnings.push(format!("{dups} duplicate edge lines dropped"));
    }
    if loops > 0 {
        warnings.push(format!("{loops} self-loop lines dropped"));
    }
    let labels = paths.labels.as_deref().map(read_indices).transpose()?;
    let splits = paths.splits.as_deref().map(read_splits).transpose()?.unwrap_or_default();

    let bundle = match &paths.graph_indicator {
        None => {
            let labels = labels.ok_or_else(|| {
                Error::Structure("node classification needs a labels file".into())
            })?;
            if labels.len() != n {
                return Err(Error::Structure(format!("{} labels for {n} nodes", labels.len())));
            }
            let g = Graph::new(n, edges, features, Some(labels))?;
            DatasetBundle::new(vec![g], Task::NodeClassification, None, splits)?
        }
        Some(ind_path) => {
            let ind = read_indices(ind_path)?;
            if ind.len() != n {
                return Err(Error::Structure(format!(
                    "graph indicator has {} lines for {n} nodes",
                    ind.len()
                )));
            }
            let graphs = split_by_indicator(&ind, &edges, &features)?;
            let labels = labels.ok_or_else(|| {
                Error::Structure("graph classification needs a labels file".into())
            })?;
            DatasetBundle::new(graphs, Task::GraphClassification, Some(labels), splits)?
        }
    };
    for w in &warnings {
        log::warn!("{}: {w}", paths.edges.display());
    }
    Ok((bundle, warnings))
}

pub fn load_edgelist(paths: &DatasetPaths) -> Result<DatasetBundle> {
    load_edgelist_reported(paths).map(|(b, _)| b)
}

fn split_by_indicator(ind: &[usize], edges: &[(usize, usize)], x: &DMatrix<f64>) -> Result<Vec<Graph>> {
    let count = ind.iter().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); count];
    let mut local = vec![0usize; ind.len()];
    for (node, &g) in ind.iter().enumerate() {
        if node > 0 && g < ind[node - 1] {
            return Err(Error::Structure(format!("graph indicator not sorted at node {node}")));
        }
        local[node] = members[g].len();
        members[g].push(node);
    }
    if let Some(g) = members.iter().position(|m| m.is_empty()) {
        return Err(Error::Structure(format!("graph {g} has no nodes")));
    }
    let mut per: Vec<Vec<(usize, usize)>> = vec![Vec::new(); count];
    for &(a, b) in edges {
        if ind[a] != ind[b] {
            return Err(Error::Structure(format!("edge ({a}, {b}) crosses graphs")));
        }
        per[ind[a]].push((local[a], local[b]));
    }
    members
        .iter()
        .zip(per)
        .map(|(m, e)| {
            let rows = x.select_rows(m.iter());
            Graph::new(m.len(), e, rows, None)
        })
        .collect()
}

/// Writes the bundle with conventional names into `dir`.
pub fn save_bundle(bundle: &DatasetBundle, dir: &Path) -> Result<DatasetPaths> {
    bundle.validate()?;
    fs::create_dir_all(dir)?;
    let paths = DatasetPaths {
        edges: dir.join("edges.txt"),
        features: dir.join("features.csv"),
        labels: bundle.labels().map(|_| dir.join("labels.txt")),
        splits: (!bundle.splits.is_empty()).then(|| dir.join("splits.txt")),
        graph_indicator: (bundle.task == Task::GraphClassification).then(|| dir.join("graph_indicator.txt")),
    };
    let mut edges = String::new();
    let mut feats = String::new();
    let mut ind = String::new();
    let mut offset = 0;
    for (gi, g) in bundle.graphs.iter().enumerate() {
        for &(a, b) in g.edges() {
            edges.push_str(&format!("{} {}\n", a + offset, b + offset));
        }
        let x = g.features();
        for i in 0..g.n_nodes() {
            let row: Vec<String> = (0..x.ncols()).map(|j| format!("{:?}", x[(i, j)])).collect();
            feats.push_str(&row.join(","));
            feats.push('\n');
            ind.push_str(&format!("{gi}\n"));
        }
        offset += g.n_nodes();
    }
    fs::write(&paths.edges, edges)?;
    fs::write(&paths.features, feats)?;
    if let (Some(p), Some(l)) = (&paths.labels, bundle.labels()) {
        let mut f = fs::File::create(p)?;
        for v in l {
            writeln!(f, "{v}")?;
        }
    }
    if let Some(p) = &paths.splits {
        let mut f = fs::File::create(p)?;
        for (name, idx) in &bundle.splits {
            writeln!(f, "[{name}]")?;
            let line: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
            writeln!(f, "{}", line.join(" "))?;
        }
    }
    if let Some(p) = &paths.graph_indicator {
        fs::write(p, ind)?;
    }
    Ok(paths)
}

/// Stochastic block model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct SbmConfig {
    pub n: usize,
    pub blocks: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub d_feat: usize,
    /// Distance of each block's feature mean from the origin.
    pub margin: f64,
    /// Feature noise standard deviation.
    pub noise: f64,
    pub train_frac: f64,
    pub val_frac: f64,
    pub seed: u64,
}

impl Default for SbmConfig {
    fn default() -> Self {
        Self {
            n: 200,
            blocks: 2,
            p_in: 0.1,
            p_out: 0.01,
            d_feat: 16,
            margin: 1.0,
            noise: 1.0,
            train_frac: 0.1,
            val_frac: 0.1,
            seed: 0,
        }
    }
}

/// Contiguous balanced block of node `i`.
pub fn sbm_block(i: usize, n: usize, blocks: usize) -> usize {
    i * blocks / n.max(1)
}

/// Samples an SBM node-classification bundle.
///
/// Block `b` has feature mean `margin * u_b` for orthonormal-ish directions
/// `u_b` (unit axes when `d_feat >= blocks`, random unit vectors otherwise)
/// plus isotropic Gaussian noise. Splits are stratified per block.
pub fn generate_sbm(cfg: &SbmConfig) -> Result<DatasetBundle> {
    if !(0.0 <= cfg.p_out && cfg.p_out < cfg.p_in && cfg.p_in <= 1.0) {
        return Err(Error::param("p_in/p_out", format!("need 0 <= p_out < p_in <= 1, got {} / {}", cfg.p_in, cfg.p_out)));
    }
    if cfg.blocks == 0 || cfg.blocks > cfg.n.max(1) {
        return Err(Error::param("blocks", format!("{} blocks for {} nodes", cfg.blocks, cfg.n)));
    }
    if !(cfg.train_frac >= 0.0 && cfg.val_frac >= 0.0 && cfg.train_frac + cfg.val_frac <= 1.0) {
        return Err(Error::param("train_frac", "split fractions must be non-negative and sum to at most 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n;
    let labels: Vec<usize> = (0..n).map(|i| sbm_block(i, n, cfg.blocks)).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if labels[i] == labels[j] { cfg.p_in } else { cfg.p_out };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let means: Vec<Vec<f64>> = (0..cfg.blocks)
        .map(|b| {
            let mut u = vec![0.0; cfg.d_feat];
            if cfg.d_feat >= cfg.blocks {
                u[b] = 1.0;
            } else if cfg.d_feat > 0 {
                u.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
                let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                u.iter_mut().for_each(|v| *v /= norm);
            }
            u.into_iter().map(|v| v * cfg.margin).collect()
        })
        .collect();
    let mut x = DMatrix::zeros(n, cfg.d_feat);
    for i in 0..n {
        for j in 0..cfg.d_feat {
            let z: f64 = StandardNormal.sample(&mut rng);
            x[(i, j)] = means[labels[i]][j] + cfg.noise * z;
        }
    }
    let splits = stratified_split(&labels, cfg.train_frac, cfg.val_frac, &mut rng);
    let g = Graph::new(n, edges, x, Some(labels))?;
    DatasetBundle::new(vec![g], Task::NodeClassification, None, splits)
}

/// Per-class shuffled train/val/test split.
pub fn stratified_split(
    labels: &[usize],
    train_frac: f64,
    val_frac: f64,
    rng: &mut ChaCha8Rng,
) -> BTreeMap<String, Vec<usize>> {
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut out: BTreeMap<String, Vec<usize>> =
        ["train", "val", "test"].iter().map(|s| (s.to_string(), Vec::new())).collect();
    for c in 0..classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(rng);
        let n_train = (train_frac * idx.len() as f64).round() as usize;
        let n_val = ((val_frac * idx.len() as f64).round() as usize).min(idx.len() - n_train);
        out.get_mut("train").unwrap().extend(&idx[..n_train]);
        out.get_mut("val").unwrap().extend(&idx[n_train..n_train + n_val]);
        out.get_mut("test").unwrap().extend(&idx[n_train + n_val..]);
    }
    for v in out.values_mut() {
        v.sort_unstable();
    }
    out
}

/// Graph-classification set: class `c` graphs are SBMs with `c + 2` blocks.
///
/// Graph sizes are drawn uniformly from `[n_min, n_max]`; node features are
/// standard Gaussian of width `d_feat`, so only structure carries the label.
pub fn generate_graph_set(
    count: usize,
    classes: usize,
    n_min: usize,
    n_max: usize,
    d_feat: usize,
    seed: u64,
) -> Result<DatasetBundle> {
    if classes == 0 || n_min < 2 || n_max < n_min {
        return Err(Error::param("classes/n_min/n_max", "need classes >= 1 and 2 <= n_min <= n_max"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut graphs = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for gi in 0..count {
        let class = gi % classes;
        let n = rng.random_range(n_min..=n_max);
        let blocks = (class + 2).min(n);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let same = sbm_block(i, n, blocks) == sbm_block(j, n, blocks);
                let p = if same { 0.6 } else { 0.05 };
                if rng.random::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        let x = DMatrix::from_fn(n, d_feat, |_, _| StandardNormal.sample(&mut rng));
        graphs.push(Graph::new(n, edges, x, None)?);
        labels.push(class);
    }
    let splits = stratified_split(&labels, 0.8, 0.0, &mut rng);
    DatasetBundle::new(graphs, Task::GraphClassification, Some(labels), splits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sbm_extremes_are_disjoint_cliques() {
        let b = generate_sbm(&SbmConfig {
            n: 10,
            p_in: 1.0,
            p_out: 0.0,
            ..Default::default()
        })
        .unwrap();
        let g = &b.graphs[0];
        assert_eq!(g.n_edges(), 2 * 10);
        assert!(g.edges().iter().all(|&(a, b)| sbm_block(a, 10, 2) == sbm_block(b, 10, 2)));
    }

    #[test]
    fn sbm_is_seeded() {
        let cfg = SbmConfig {
            n: 40,
            seed: 9,
            ..Default::default()
        };
        assert_eq!(generate_sbm(&cfg).unwrap(), generate_sbm(&cfg).unwrap());
        let other = SbmConfig { seed: 10, ..cfg };
        assert_ne!(generate_sbm(&other).unwrap(), generate_sbm(&SbmConfig { seed: 9, ..other.clone() }).unwrap());
    }

    #[test]
    fn sbm_rejects_bad_probabilities() {
        let cfg = SbmConfig {
            p_in: 0.1,
            p_out: 0.1,
            ..Default::default()
        };
        assert!(generate_sbm(&cfg).is_err());
    }

    #[test]
    fn splits_are_disjoint_and_cover() {
        let b = generate_sbm(&SbmConfig::default()).unwrap();
        let total: usize = b.splits.values().map(|v| v.len()).sum();
        assert_eq!(total, 200);
        assert_eq!(b.split("train").unwrap().len(), 20);
    }

    #[test]
    fn graph_set_labels_cycle() {
        let b = generate_graph_set(6, 2, 6, 9, 3, 1).unwrap();
        assert_eq!(b.graph_labels.as_deref(), Some(&[0, 1, 0, 1, 0, 1][..]));
        assert_eq!(b.n_items(), 6);
    }
}
