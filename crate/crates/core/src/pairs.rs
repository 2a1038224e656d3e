//! Lower-triangular node-pair matrices over an explicit support.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Values on a fixed set of node pairs `(i, j)` with `i > j`.
///
/// Pairs are sorted and unique. The support is reference counted so that
/// augmentation matrices, their gradients and Bernoulli samples can share it.
#[derive(Clone, Debug, PartialEq)]
pub struct PairMatrix {
    n: usize,
    pairs: Arc<Vec<(u32, u32)>>,
    values: Vec<f64>,
}

impl PairMatrix {
    /// Every lower-triangular pair, all values zero.
    pub fn full(n: usize) -> Self {
        let mut pairs = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in 0..i {
                pairs.push((i as u32, j as u32));
            }
        }
        let len = pairs.len();
        Self {
            n,
            pairs: Arc::new(pairs),
            values: vec![0.0; len],
        }
    }

    /// Zero values on the given support; pairs are canonicalized to `i > j`.
    pub fn with_support(n: usize, support: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut pairs = Vec::new();
        for (a, b) in support {
            if a == b || a >= n || b >= n {
                return Err(Error::Structure(format!(
                    "pair ({a}, {b}) invalid for {n} nodes"
                )));
            }
            pairs.push((a.max(b) as u32, a.min(b) as u32));
        }
        pairs.sort_unstable();
        pairs.dedup();
        let len = pairs.len();
        Ok(Self {
            n,
            pairs: Arc::new(pairs),
            values: vec![0.0; len],
        })
    }

    /// From `(i, j, value)` triplets with `i > j`, sorted and unique.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut m = Self::with_support(n, triplets.iter().map(|t| (t.0, t.1)))?;
        if m.pairs.len() != triplets.len() {
            return Err(Error::Structure("duplicate pairs in triplets".into()));
        }
        for &(a, b, v) in triplets {
            let idx = m.index_of(a, b).expect("pair in support");
            m.values[idx] = v;
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Same support, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.pairs.len());
        Self {
            n: self.n,
            pairs: Arc::clone(&self.pairs),
            values,
        }
    }

    pub fn zeros_like(&self) -> Self {
        self.with_values(vec![0.0; self.pairs.len()])
    }

    pub fn same_support(&self, other: &PairMatrix) -> bool {
        self.n == other.n && (Arc::ptr_eq(&self.pairs, &other.pairs) || self.pairs == other.pairs)
    }

    pub fn index_of(&self, i: usize, j: usize) -> Option<usize> {
        let key = (i.max(j) as u32, i.min(j) as u32);
        self.pairs.binary_search(&key).ok()
    }

    /// Value at `(i, j)` (either order); zero off the support and on the diagonal.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        self.index_of(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.pairs
            .iter()
            .zip(&self.values)
            .map(|(&(i, j), &v)| (i as usize, j as usize, v))
    }

    /// Nonzero triplets.
    pub fn nonzeros(&self) -> Vec<(usize, usize, f64)> {
        self.iter().filter(|t| t.2 != 0.0).collect()
    }

    /// Bytes held by support and values.
    pub fn bytes(&self) -> usize {
        self.pairs.len() * std::mem::size_of::<(u32, u32)>() + self.values.len() * 8
    }
}
