//! Undirected attributed graphs, homophily and graph utilities.

mod io;
mod sbm;

use std::collections::VecDeque;
use std::sync::OnceLock;

pub use io::{
    load_graph, load_graph_with_report, read_matrix, save_graph, write_matrix, LoadReport, EDGES_FILE, FEATURES_FILE,
    LABELS_FILE,
};
pub use sbm::{sbm_generate, SbmSpec};

use crate::error::{Error, Result};
use crate::numeric::{spmm, CsrMatrix, DenseMatrix};

/// Per-node integer class ids (ground truth, clusters or partitions).
pub type LabelVector = Vec<usize>;

/// Counts of edge entries discarded while building a [`Graph`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EdgeCleanup {
    pub self_loops: usize,
    /// Entries whose unordered pair had already been seen, including the
    /// reverse direction of a symmetric edge list.
    pub repeated: usize,
}

/// Immutable undirected graph with node features and optional labels.
///
/// Each undirected edge is kept once in `edges` (as `u < v`) for counting,
/// and in both directions in the adjacency lists for propagation.
#[derive(Debug)]
pub struct Graph {
    num_nodes: usize,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    edges: Vec<(usize, usize)>,
    features: DenseMatrix,
    labels: Option<LabelVector>,
    num_classes: usize,
    max_degree: usize,
    norm_adj: OnceLock<CsrMatrix>,
    propagated: OnceLock<DenseMatrix>,
}

impl Clone for Graph {
    fn clone(&self) -> Self {
        Self {
            num_nodes: self.num_nodes,
            offsets: self.offsets.clone(),
            neighbors: self.neighbors.clone(),
            edges: self.edges.clone(),
            features: self.features.clone(),
            labels: self.labels.clone(),
            num_classes: self.num_classes,
            max_degree: self.max_degree,
            norm_adj: OnceLock::new(),
            propagated: OnceLock::new(),
        }
    }
}

impl Graph {
    /// Builds a graph, dropping self-loops and repeated pairs.
    pub fn new(
        num_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        features: DenseMatrix,
        labels: Option<LabelVector>,
    ) -> Result<Self> {
        Self::build(num_nodes, edges, features, labels).map(|(g, _)| g)
    }

    /// Like [`Graph::new`] but also reports what was discarded.
    pub fn build(
        num_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        features: DenseMatrix,
        labels: Option<LabelVector>,
    ) -> Result<(Self, EdgeCleanup)> {
        if features.rows() != num_nodes {
            return Err(Error::Shape(format!(
                "{} feature rows for {num_nodes} nodes",
                features.rows()
            )));
        }
        if let Some(l) = &labels {
            if l.len() != num_nodes {
                return Err(Error::Shape(format!("{} labels for {num_nodes} nodes", l.len())));
            }
        }
        let mut cleanup = EdgeCleanup::default();
        let mut pairs = Vec::new();
        let mut seen = 0usize;
        for (u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::Shape(format!(
                    "edge ({u},{v}) references a node outside [0,{num_nodes})"
                )));
            }
            seen += 1;
            if u == v {
                cleanup.self_loops += 1;
                continue;
            }
            pairs.push((u.min(v), u.max(v)));
        }
        pairs.sort_unstable();
        pairs.dedup();
        cleanup.repeated = seen - cleanup.self_loops - pairs.len();

        let mut degree = vec![0usize; num_nodes];
        for &(u, v) in &pairs {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = vec![0usize; num_nodes + 1];
        for i in 0..num_nodes {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let mut cursor = offsets.clone();
        let mut neighbors = vec![0usize; offsets[num_nodes]];
        for &(u, v) in &pairs {
            neighbors[cursor[u]] = v;
            cursor[u] += 1;
            neighbors[cursor[v]] = u;
            cursor[v] += 1;
        }
        for i in 0..num_nodes {
            neighbors[offsets[i]..offsets[i + 1]].sort_unstable();
        }
        let num_classes = labels
            .as_ref()
            .and_then(|l| l.iter().max().map(|m| m + 1))
            .unwrap_or(0);
        let max_degree = degree.iter().copied().max().unwrap_or(0);
        Ok((
            Self {
                num_nodes,
                offsets,
                neighbors,
                edges: pairs,
                features,
                labels,
                num_classes,
                max_degree,
                norm_adj: OnceLock::new(),
                propagated: OnceLock::new(),
            },
            cleanup,
        ))
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Undirected edges, each once with `u < v`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.neighbors[self.offsets[u]..self.offsets[u + 1]]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Returns a copy with the feature matrix replaced.
    pub fn with_features(&self, features: DenseMatrix) -> Result<Graph> {
        if features.rows() != self.num_nodes {
            return Err(Error::Shape(format!(
                "{} feature rows for {} nodes",
                features.rows(),
                self.num_nodes
            )));
        }
        let mut g = self.clone();
        g.features = features;
        Ok(g)
    }

    /// Symmetric-normalized adjacency with self-loops, computed once.
    pub fn normalized_adjacency(&self) -> &CsrMatrix {
        self.norm_adj.get_or_init(|| normalized_adjacency(self))
    }

    /// `Ã X`, the propagated feature matrix, computed once.
    pub fn propagated_features(&self) -> &DenseMatrix {
        self.propagated.get_or_init(|| {
            spmm(self.normalized_adjacency(), &self.features).expect("feature rows match node count")
        })
    }
}

/// Fraction of undirected edges whose endpoints share a label.
pub fn homophily(graph: &Graph, labels: &[usize]) -> Result<f64> {
    if labels.len() != graph.num_nodes() {
        return Err(Error::Shape(format!(
            "{} labels for {} nodes",
            labels.len(),
            graph.num_nodes()
        )));
    }
    if graph.num_edges() == 0 {
        return Err(Error::NoEdges);
    }
    let intra = graph
        .edges()
        .iter()
        .filter(|&&(u, v)| labels[u] == labels[v])
        .count();
    Ok(intra as f64 / graph.num_edges() as f64)
}

/// Unweighted hop distances from `source`; anything farther than `cap` (or
/// unreachable) is reported as `cap + 1`.
pub fn bfs_distances(graph: &Graph, source: usize, cap: usize) -> Vec<usize> {
    let sentinel = cap + 1;
    let mut dist = vec![sentinel; graph.num_nodes()];
    dist[source] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u];
        if du >= cap {
            continue;
        }
        for &v in graph.neighbors(u) {
            if dist[v] == sentinel {
                dist[v] = du + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` with `D̃` the degree matrix of `A + I`.
pub fn normalized_adjacency(graph: &Graph) -> CsrMatrix {
    let n = graph.num_nodes();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|u| 1.0 / ((graph.degree(u) + 1) as f64).sqrt())
        .collect();
    let mut indptr = Vec::with_capacity(n + 1);
    let mut indices = Vec::with_capacity(graph.neighbors.len() + n);
    let mut values = Vec::with_capacity(graph.neighbors.len() + n);
    indptr.push(0);
    for u in 0..n {
        let mut placed_self = false;
        for &v in graph.neighbors(u) {
            if !placed_self && v > u {
                indices.push(u);
                values.push(inv_sqrt[u] * inv_sqrt[u]);
                placed_self = true;
            }
            indices.push(v);
            values.push(inv_sqrt[u] * inv_sqrt[v]);
        }
        if !placed_self {
            indices.push(u);
            values.push(inv_sqrt[u] * inv_sqrt[u]);
        }
        indptr.push(indices.len());
    }
    CsrMatrix::new(n, n, indptr, indices, values).expect("adjacency lists are sorted and in range")
}
