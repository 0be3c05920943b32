//! Graph containers and structural preprocessing shared by every model:
//! self-loop augmentation, symmetric adjacency normalization, neighborhood
//! enumeration in receiver-major (CSR) order, and block-diagonal batching.

use ndarray::Array2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("edge ({0}, {1}) references a node >= num_nodes ({2})")]
    EdgeOutOfRange(usize, usize, usize),
    #[error("feature matrix has {rows} rows but the graph has {nodes} nodes")]
    FeatureRowMismatch { rows: usize, nodes: usize },
    #[error("feature matrix must have at least one column")]
    EmptyFeatures,
    #[error("node {0} has degree 0; add self-loops before normalizing")]
    IsolatedNode(usize),
    #[error("cannot batch an empty graph list")]
    EmptyBatch,
    #[error("graph {index} has {got} feature columns, expected {expected}")]
    FeatureDimMismatch {
        index: usize,
        got: usize,
        expected: usize,
    },
}

/// One graph sample: node features, an undirected edge set stored as ordered
/// pairs (both directions present), and a class label.
#[derive(Debug, Clone)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    node_features: Array2<f64>,
    label: usize,
}

impl Graph {
    /// Builds a graph, symmetrizing and deduplicating the edge list so the
    /// "both directions present" invariant holds no matter how edges arrive.
    pub fn new(
        num_nodes: usize,
        edges: &[(usize, usize)],
        node_features: Array2<f64>,
        label: usize,
    ) -> Result<Self, GraphError> {
        for &(u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(GraphError::EdgeOutOfRange(u, v, num_nodes));
            }
        }
        if node_features.nrows() != num_nodes {
            return Err(GraphError::FeatureRowMismatch {
                rows: node_features.nrows(),
                nodes: num_nodes,
            });
        }
        if node_features.ncols() == 0 {
            return Err(GraphError::EmptyFeatures);
        }
        let mut sym: Vec<(usize, usize)> = Vec::with_capacity(edges.len() * 2);
        for &(u, v) in edges {
            sym.push((u, v));
            sym.push((v, u));
        }
        sym.sort_unstable();
        sym.dedup();
        Ok(Graph {
            num_nodes,
            edges: sym,
            node_features,
            label,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Ordered pairs, sorted, both directions present.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn node_features(&self) -> &Array2<f64> {
        &self.node_features
    }

    pub fn label(&self) -> usize {
        self.label
    }

    /// Replaces the feature matrix (used by feature construction).
    pub fn with_features(mut self, features: Array2<f64>) -> Result<Self, GraphError> {
        if features.nrows() != self.num_nodes {
            return Err(GraphError::FeatureRowMismatch {
                rows: features.nrows(),
                nodes: self.num_nodes,
            });
        }
        if features.ncols() == 0 {
            return Err(GraphError::EmptyFeatures);
        }
        self.node_features = features;
        Ok(self)
    }

    /// Degree counting distinct neighbors other than the node itself, i.e.
    /// unaffected by self-loop augmentation.
    pub fn simple_degree(&self, p: usize) -> usize {
        self.edges.iter().filter(|&&(u, v)| u == p && v != p).count()
    }
}

/// Returns a copy of `g` with edge (p, p) present for every node exactly once.
/// Idempotent; never removes edges.
#[must_use]
pub fn add_self_loops(g: &Graph) -> Graph {
    let mut edges = g.edges.clone();
    for p in 0..g.num_nodes {
        edges.push((p, p));
    }
    edges.sort_unstable();
    edges.dedup();
    Graph {
        num_nodes: g.num_nodes,
        edges,
        node_features: g.node_features.clone(),
        label: g.label,
    }
}

/// Symmetrically normalized adjacency in receiver-major layout.
///
/// Edge k runs from neighbor `nbr_idx[k]` into receiver `receivers[k]` with
/// weight `values[k]` = 1 / sqrt(deg(p) * deg(p')). Edges of receiver p
/// occupy the contiguous range `row_starts[p] .. row_starts[p + 1]`, so the
/// per-neighborhood segment operations can run on slices.
#[derive(Debug, Clone)]
pub struct NormalizedAdjacency {
    pub num_nodes: usize,
    pub receivers: Vec<usize>,
    pub nbr_idx: Vec<usize>,
    pub values: Vec<f64>,
    pub row_starts: Vec<usize>,
}

impl NormalizedAdjacency {
    /// Neighbors of `p` (self included once self-loops were added).
    pub fn neighbors(&self, p: usize) -> &[usize] {
        &self.nbr_idx[self.row_starts[p]..self.row_starts[p + 1]]
    }

    pub fn num_edges(&self) -> usize {
        self.nbr_idx.len()
    }

    /// Weight of edge (p, p') or None when not adjacent.
    pub fn weight(&self, p: usize, q: usize) -> Option<f64> {
        let lo = self.row_starts[p];
        let hi = self.row_starts[p + 1];
        self.nbr_idx[lo..hi]
            .iter()
            .position(|&v| v == q)
            .map(|off| self.values[lo + off])
    }
}

fn normalize_edges(
    num_nodes: usize,
    edges: &[(usize, usize)],
) -> Result<NormalizedAdjacency, GraphError> {
    // Degree of the self-looped graph: row sum of A + I.
    let mut degree = vec![0usize; num_nodes];
    for &(u, _) in edges {
        degree[u] += 1;
    }
    if let Some(p) = degree.iter().position(|&d| d == 0) {
        return Err(GraphError::IsolatedNode(p));
    }

    // Edges arrive sorted by (receiver, neighbor); rebuild CSR row starts.
    let mut row_starts = Vec::with_capacity(num_nodes + 1);
    row_starts.push(0);
    let mut acc = 0;
    for d in &degree {
        acc += d;
        row_starts.push(acc);
    }

    let mut receivers = Vec::with_capacity(edges.len());
    let mut nbr_idx = Vec::with_capacity(edges.len());
    let mut values = Vec::with_capacity(edges.len());
    for &(u, v) in edges {
        receivers.push(u);
        nbr_idx.push(v);
        values.push(1.0 / ((degree[u] as f64) * (degree[v] as f64)).sqrt());
    }
    Ok(NormalizedAdjacency {
        num_nodes,
        receivers,
        nbr_idx,
        values,
        row_starts,
    })
}

/// D^{-1/2} (A + I) D^{-1/2} for a graph that already carries its self-loops.
/// Fails if any node has no incident edge at all.
pub fn normalize_adjacency(g: &Graph) -> Result<NormalizedAdjacency, GraphError> {
    normalize_edges(g.num_nodes, &g.edges)
}

/// Block-diagonal packing of several graphs: features stacked, edges
/// reindexed into the global numbering, one indicator entry per node.
#[derive(Debug, Clone)]
pub struct GraphBatch {
    pub node_features: Array2<f64>,
    pub edges: Vec<(usize, usize)>,
    pub graph_indicator: Vec<usize>,
    pub labels: Vec<usize>,
    /// Prefix offsets, length num_graphs + 1; graph i owns global nodes
    /// offsets[i] .. offsets[i + 1].
    pub offsets: Vec<usize>,
}

impl GraphBatch {
    pub fn num_graphs(&self) -> usize {
        self.labels.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.node_features.nrows()
    }

    pub fn normalized_adjacency(&self) -> Result<NormalizedAdjacency, GraphError> {
        normalize_edges(self.num_nodes(), &self.edges)
    }
}

pub fn batch_graphs(graphs: &[Graph]) -> Result<GraphBatch, GraphError> {
    if graphs.is_empty() {
        return Err(GraphError::EmptyBatch);
    }
    let dim = graphs[0].node_features.ncols();
    let total: usize = graphs.iter().map(|g| g.num_nodes).sum();

    let mut features = Array2::<f64>::zeros((total, dim));
    let mut edges = Vec::new();
    let mut indicator = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(graphs.len());
    let mut offsets = Vec::with_capacity(graphs.len() + 1);
    offsets.push(0);

    let mut base = 0;
    for (i, g) in graphs.iter().enumerate() {
        if g.node_features.ncols() != dim {
            return Err(GraphError::FeatureDimMismatch {
                index: i,
                got: g.node_features.ncols(),
                expected: dim,
            });
        }
        features
            .slice_mut(ndarray::s![base..base + g.num_nodes, ..])
            .assign(&g.node_features);
        for &(u, v) in &g.edges {
            edges.push((base + u, base + v));
        }
        indicator.extend(std::iter::repeat(i).take(g.num_nodes));
        labels.push(g.label);
        base += g.num_nodes;
        offsets.push(base);
    }
    // Global edges stay sorted because per-graph lists are sorted and bases
    // increase, which keeps the receiver-major CSR assumption valid.
    Ok(GraphBatch {
        node_features: features,
        edges,
        graph_indicator: indicator,
        labels,
        offsets,
    })
}

/// One-hot encoding of min(simple degree, max_degree); output has
/// max_degree + 1 columns and unit row sums.
#[must_use]
pub fn degree_features(g: &Graph, max_degree: usize) -> Array2<f64> {
    degree_features_raw(g.num_nodes, &g.edges, max_degree)
}

/// Structure-only variant for callers that have not attached features yet.
#[must_use]
pub fn degree_features_raw(
    num_nodes: usize,
    edges: &[(usize, usize)],
    max_degree: usize,
) -> Array2<f64> {
    let mut deg = vec![0usize; num_nodes];
    for &(u, v) in edges {
        if u != v {
            deg[u] += 1;
        }
    }
    let mut out = Array2::<f64>::zeros((num_nodes, max_degree + 1));
    for (p, &d) in deg.iter().enumerate() {
        out[[p, d.min(max_degree)]] = 1.0;
    }
    out
}
