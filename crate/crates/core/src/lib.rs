//! Joint deep embedded clustering of attributed networks.
//!
//! An attribute autoencoder and a graph autoencoder each produce a Student's-t
//! soft assignment over K clusters; both are self-trained towards sharpened
//! target distributions while a KL term pulls the attribute-side assignment
//! towards the graph-side one. The crate also carries an LFR-style benchmark
//! generator, clustering metrics and the experiment harness behind the CLI.

pub mod dec;
pub mod error;
pub mod graph;
pub mod harness;
pub mod io;
pub mod lfr;
pub mod linalg;
pub mod metrics;
pub mod nn;

pub use error::{Error, Result};
pub use graph::{AttributedNetwork, KnnMetric, NormalizedAdjacency};
pub use linalg::{DenseMatrix, SparseMatrix};
