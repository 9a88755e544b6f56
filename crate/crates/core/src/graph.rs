//! Attributed networks, GCN adjacency normalization and kNN graphs.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, SparseMatrix};

/// An undirected graph with a dense attribute row per node and optional
/// ground-truth cluster labels.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributedNetwork {
    adjacency: SparseMatrix,
    attributes: DenseMatrix,
    labels: Option<Vec<usize>>,
    /// Set when the source edge list listed some edges in one direction only.
    pub symmetrized_input: bool,
}

impl AttributedNetwork {
    /// Validates that `adjacency` is a symmetric 0/1 matrix with an empty
    /// diagonal, sized to the attribute rows and label vector.
    pub fn new(
        adjacency: SparseMatrix,
        attributes: DenseMatrix,
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        let n = attributes.rows();
        if adjacency.rows() != n || adjacency.cols() != n {
            return Err(Error::shape(
                "AttributedNetwork::new",
                format!(
                    "adjacency {}x{} for {n} attribute rows",
                    adjacency.rows(),
                    adjacency.cols()
                ),
            ));
        }
        if let Some((i, j, v)) = adjacency.triplets().find(|&(i, j, v)| i == j || v != 1.0) {
            return Err(Error::Parameter(format!(
                "adjacency entry ({i}, {j}) = {v}; expected off-diagonal 0/1 values"
            )));
        }
        if !adjacency.is_symmetric() {
            return Err(Error::Parameter("adjacency is not symmetric".into()));
        }
        if !attributes.is_finite() {
            return Err(Error::Parameter("attributes contain non-finite values".into()));
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::Labels(format!("{} labels for {n} nodes", l.len())));
            }
        }
        Ok(Self {
            adjacency,
            attributes,
            labels,
            symmetrized_input: false,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.attributes.rows()
    }

    pub fn attr_dim(&self) -> usize {
        self.attributes.cols()
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.nnz() / 2
    }

    pub fn adjacency(&self) -> &SparseMatrix {
        &self.adjacency
    }

    pub fn attributes(&self) -> &DenseMatrix {
        &self.attributes
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Number of distinct ground-truth clusters (`max label + 1`).
    pub fn num_clusters(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().max().map_or(0, |m| m + 1))
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency.row_nnz(i)
    }

    /// True when every attribute is exactly 0 or 1.
    pub fn has_binary_attributes(&self) -> bool {
        self.attributes.data().iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Fraction of edges whose endpoints carry different labels.
    pub fn external_edge_fraction(&self) -> Option<f64> {
        let labels = self.labels.as_ref()?;
        let total = self.adjacency.nnz();
        if total == 0 {
            return Some(0.0);
        }
        let external = self
            .adjacency
            .triplets()
            .filter(|&(i, j, _)| labels[i] != labels[j])
            .count();
        Some(external as f64 / total as f64)
    }
}

/// Newman modularity of a partition over an undirected 0/1 adjacency.
pub fn modularity(adjacency: &SparseMatrix, labels: &[usize]) -> f64 {
    let two_m = adjacency.nnz() as f64;
    if two_m == 0.0 {
        return 0.0;
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut internal = vec![0.0; k];
    let mut degree_sum = vec![0.0; k];
    for i in 0..adjacency.rows() {
        degree_sum[labels[i]] += adjacency.row_nnz(i) as f64;
        let (idx, _) = adjacency.row(i);
        internal[labels[i]] += idx.iter().filter(|&&j| labels[j] == labels[i]).count() as f64;
    }
    internal
        .iter()
        .zip(&degree_sum)
        .map(|(&e, &d)| e / two_m - (d / two_m).powi(2))
        .sum()
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` for a GCN layer.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    matrix: SparseMatrix,
}

impl NormalizedAdjacency {
    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }
}

pub fn normalize_adjacency(net: &AttributedNetwork) -> NormalizedAdjacency {
    let a = net.adjacency();
    let n = a.rows();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| 1.0 / ((a.row_nnz(i) + 1) as f64).sqrt())
        .collect();
    let mut trip = Vec::with_capacity(a.nnz() + n);
    for i in 0..n {
        trip.push((i, i, inv_sqrt[i] * inv_sqrt[i]));
        let (idx, val) = a.row(i);
        for (&j, &v) in idx.iter().zip(val) {
            trip.push((i, j, v * inv_sqrt[i] * inv_sqrt[j]));
        }
    }
    NormalizedAdjacency {
        matrix: SparseMatrix::from_triplets(n, n, trip)
            .expect("normalized entries are in range and unique"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KnnMetric {
    #[default]
    Euclidean,
    Cosine,
}

impl fmt::Display for KnnMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KnnMetric::Euclidean => "euclidean",
            KnnMetric::Cosine => "cosine",
        })
    }
}

impl FromStr for KnnMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(KnnMetric::Euclidean),
            "cosine" => Ok(KnnMetric::Cosine),
            other => Err(Error::Parameter(format!("unknown kNN metric `{other}`"))),
        }
    }
}

/// A kNN graph and the directed neighbor pairs it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnGraph {
    /// Symmetrized 0/1 union of the directed pairs.
    pub adjacency: SparseMatrix,
    /// `(node, neighbor)` pairs, exactly `k` per node.
    pub directed: Vec<(usize, usize)>,
}

impl KnnGraph {
    /// The edge count as tabulated for kNN datasets (`n·k`).
    pub fn directed_pair_count(&self) -> usize {
        self.directed.len()
    }
}

/// Exact k-nearest-neighbor graph. Ties go to the smaller node index.
pub fn build_knn_graph(features: &DenseMatrix, k: usize, metric: KnnMetric) -> Result<KnnGraph> {
    let n = features.rows();
    if k == 0 || k >= n {
        return Err(Error::Parameter(format!(
            "kNN needs 1 <= k < n, got k={k}, n={n}"
        )));
    }
    let norms: Vec<f64> = features
        .iter_rows()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let distance = |i: usize, j: usize| -> f64 {
        let (a, b) = (features.row(i), features.row(j));
        match metric {
            KnnMetric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum(),
            KnnMetric::Cosine => {
                let denom = norms[i] * norms[j];
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                if denom > 0.0 {
                    1.0 - dot / denom
                } else {
                    1.0
                }
            }
        }
    };
    let mut directed = Vec::with_capacity(n * k);
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        cand.clear();
        cand.extend((0..n).filter(|&j| j != i).map(|j| (distance(i, j), j)));
        let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        cand.select_nth_unstable_by(k - 1, by_dist);
        let nearest = &mut cand[..k];
        nearest.sort_unstable_by(by_dist);
        directed.extend(nearest.iter().map(|&(_, j)| (i, j)));
    }
    let adjacency = SparseMatrix::adjacency_from_pairs(n, directed.iter().copied())?;
    Ok(KnnGraph {
        adjacency,
        directed,
    })
}
