//! Validated graphs, node-feature matrices, and Dirichlet-energy primitives.
//!
//! Graphs are simple, undirected, and connected, with every edge stored once
//! as `(i, j)` with `i < j` in lexicographic order. Everything is dense and
//! immutable after construction; all operations here are pure.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense storage keeps eigendecompositions exact and cheap at this scale.
pub const MAX_NODES: usize = 200;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("self-loop at node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("graph is not connected")]
    Disconnected,
    #[error("node index {index} out of range for n={n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("graph needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("graph has {0} nodes, maximum is {MAX_NODES}")]
    TooManyNodes(usize),
    #[error("feature matrix has {rows} rows but graph has {n} nodes")]
    DimensionMismatch { rows: usize, n: usize },
    #[error("feature matrix contains a non-finite entry")]
    NonFiniteEntry,
    #[error("feature matrix must have at least one column")]
    EmptyFeatures,
    #[error("feature matrix has zero norm")]
    ZeroFeatureNorm,
    #[error("edge ({0}, {1}) is not in the graph")]
    EdgeNotInGraph(usize, usize),
    #[error("malformed graph object: {0}")]
    InvalidFormat(String),
}

/// An undirected simple graph on nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    degrees: Vec<usize>,
    neighbors: Vec<Vec<usize>>,
    connected: bool,
}

/// Serialized form: `{"n": ..., "edges": [[i, j], ...]}` with `i < j`,
/// edges sorted lexicographically.
#[derive(Serialize, Deserialize)]
struct GraphWire {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Build a validated graph: simple, undirected, connected.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let g = Self::build(n, edges)?;
        if !g.connected {
            return Err(GraphError::Disconnected);
        }
        if n < 2 {
            return Err(GraphError::TooFewNodes(n));
        }
        Ok(g)
    }

    /// Build a simple graph that may be disconnected or have isolated nodes.
    ///
    /// Motif search accepts such hosts (a pattern can be matched inside any
    /// simple graph); the dynamics and spectral operations require [`Graph::new`]
    /// graphs and document that assumption.
    pub fn new_relaxed(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::TooFewNodes(0));
        }
        Self::build(n, edges)
    }

    fn build(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        if n > MAX_NODES {
            return Err(GraphError::TooManyNodes(n));
        }
        let mut canon: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= n {
                return Err(GraphError::IndexOutOfRange { index: a, n });
            }
            if b >= n {
                return Err(GraphError::IndexOutOfRange { index: b, n });
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            canon.push((a.min(b), a.max(b)));
        }
        canon.sort_unstable();
        for w in canon.windows(2) {
            if w[0] == w[1] {
                return Err(GraphError::DuplicateEdge(w[0].0, w[0].1));
            }
        }
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in &canon {
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
        }
        let degrees: Vec<usize> = neighbors.iter().map(Vec::len).collect();
        let connected = Self::is_connected_impl(n, &neighbors);
        Ok(Self {
            n,
            edges: canon,
            degrees,
            neighbors,
            connected,
        })
    }

    fn is_connected_impl(n: usize, neighbors: &[Vec<usize>]) -> bool {
        if n == 0 {
            return false;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &neighbors[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == n
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Edges as `(i, j)` with `i < j`, sorted lexicographically.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.degrees[v]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a < self.n && b < self.n && self.neighbors[a].binary_search(&b).is_ok()
    }

    pub fn is_connected(&self) -> bool {
        self.connected
    }

    /// Dense adjacency matrix.
    pub fn adjacency(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.n, self.n));
        for &(i, j) in &self.edges {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
        a
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "n": self.n, "edges": self.edges })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self, GraphError> {
        let wire: GraphWire = serde_json::from_value(value.clone())
            .map_err(|e| GraphError::InvalidFormat(e.to_string()))?;
        Self::new(wire.n, &wire.edges)
    }
}

/// An `n x d` real node-feature matrix tied to a graph of `n` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Array2<f64>,
}

impl FeatureMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self, GraphError> {
        if values.ncols() == 0 {
            return Err(GraphError::EmptyFeatures);
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(GraphError::NonFiniteEntry);
        }
        Ok(Self { values })
    }

    /// Build from row-major data.
    pub fn from_rows(n: usize, d: usize, data: Vec<f64>) -> Result<Self, GraphError> {
        let values = Array2::from_shape_vec((n, d), data).map_err(|_| {
            GraphError::DimensionMismatch { rows: 0, n }
        })?;
        Self::new(values)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn row(&self, i: usize) -> ndarray::ArrayView1<'_, f64> {
        self.values.row(i)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

fn check_dims(g: &Graph, f: &FeatureMatrix) -> Result<(), GraphError> {
    if f.n() != g.n() {
        return Err(GraphError::DimensionMismatch {
            rows: f.n(),
            n: g.n(),
        });
    }
    Ok(())
}

/// Dirichlet energy `E(F) = sum over edges of |f_i/sqrt(d_i) - f_j/sqrt(d_j)|^2`,
/// which equals `trace(F^T Delta F)` for the normalized Laplacian `Delta`.
pub fn dirichlet_energy(g: &Graph, f: &FeatureMatrix) -> Result<f64, GraphError> {
    check_dims(g, f)?;
    Ok(edge_sum(g, f, g.edges()))
}

/// The same per-edge sum restricted to `subset`; `subset = E` recovers
/// [`dirichlet_energy`].
pub fn edge_subset_dirichlet_energy(
    g: &Graph,
    f: &FeatureMatrix,
    subset: &[(usize, usize)],
) -> Result<f64, GraphError> {
    check_dims(g, f)?;
    for &(a, b) in subset {
        if !g.has_edge(a, b) {
            return Err(GraphError::EdgeNotInGraph(a, b));
        }
    }
    Ok(edge_sum(g, f, subset))
}

fn edge_sum(g: &Graph, f: &FeatureMatrix, edges: &[(usize, usize)]) -> f64 {
    let mut total = 0.0;
    for &(a, b) in edges {
        let sa = 1.0 / (g.degree(a) as f64).sqrt();
        let sb = 1.0 / (g.degree(b) as f64).sqrt();
        let mut term = 0.0;
        for (x, y) in f.row(a).iter().zip(f.row(b).iter()) {
            let diff = x * sa - y * sb;
            term += diff * diff;
        }
        total += term;
    }
    total
}

/// Normalized Dirichlet energy `E(F) / |F|^2`, the scale-invariant frequency
/// indicator; lies in `[0, lambda_max]`.
pub fn rayleigh_quotient(g: &Graph, f: &FeatureMatrix) -> Result<f64, GraphError> {
    check_dims(g, f)?;
    let norm_sq = f.values().iter().map(|x| x * x).sum::<f64>();
    if norm_sq == 0.0 {
        return Err(GraphError::ZeroFeatureNorm);
    }
    Ok(edge_sum(g, f, g.edges()) / norm_sq)
}
