//! Centrality-guided Laplacian augmentation and adversarial bootstrapped
//! self-supervised learning on graphs.

pub mod augment;
pub mod bench;
pub mod autodiff;
pub mod centrality;
pub mod config;
pub mod data;
pub mod encoders;
pub mod eval;
pub mod error;
pub mod graph;
pub mod pairs;
pub mod pipeline;
pub mod spectral;
pub mod train;

pub use error::{Error, Result};
pub use graph::{build_adjacency, normalized_laplacian, Graph, NormalizedLaplacian, SparseSym};
pub use pairs::PairMatrix;
