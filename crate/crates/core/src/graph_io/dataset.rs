use crate::autodiff::Matrix;

use super::GraphIoError;

/// One attributed, labelled graph with a dense symmetric 0/1 adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInstance {
    adjacency: Matrix,
    features: Matrix,
    label: usize,
}

impl GraphInstance {
    pub fn new(adjacency: Matrix, features: Matrix, label: usize) -> Result<Self, GraphIoError> {
        let n = adjacency.rows();
        if n == 0 {
            return Err(GraphIoError::Invalid("graph has no nodes".into()));
        }
        if adjacency.cols() != n {
            return Err(GraphIoError::Invalid(format!(
                "adjacency is {:?}, expected square",
                adjacency.shape()
            )));
        }
        if features.rows() != n {
            return Err(GraphIoError::Invalid(format!(
                "{} feature rows for {n} nodes",
                features.rows()
            )));
        }
        for i in 0..n {
            if adjacency[(i, i)] != 0.0 {
                return Err(GraphIoError::Invalid(format!("self-loop on node {i}")));
            }
            for j in 0..i {
                let v = adjacency[(i, j)];
                if v != adjacency[(j, i)] || (v != 0.0 && v != 1.0) {
                    return Err(GraphIoError::Invalid(format!(
                        "adjacency entry ({i}, {j}) is not a symmetric 0/1 value"
                    )));
                }
            }
        }
        Ok(Self {
            adjacency,
            features,
            label,
        })
    }

    /// Builds a graph from undirected 0-based edges; duplicates and
    /// self-loops are ignored.
    pub fn from_edges(
        node_count: usize,
        edges: &[(usize, usize)],
        features: Matrix,
        label: usize,
    ) -> Result<Self, GraphIoError> {
        let mut adjacency = Matrix::zeros(node_count, node_count);
        for &(i, j) in edges {
            if i >= node_count || j >= node_count {
                return Err(GraphIoError::Invalid(format!(
                    "edge ({i}, {j}) out of range for {node_count} nodes"
                )));
            }
            if i != j {
                adjacency[(i, j)] = 1.0;
                adjacency[(j, i)] = 1.0;
            }
        }
        Self::new(adjacency, features, label)
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.rows()
    }

    pub fn edge_count(&self) -> usize {
        (self.adjacency.sum() / 2.0).round() as usize
    }

    pub fn adjacency(&self) -> &Matrix {
        &self.adjacency
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    /// Undirected edges `(i, j)` with `i < j`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.node_count();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if self.adjacency[(i, j)] != 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// The same graph with node `i` relabelled as `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            adjacency: self.adjacency.permute_symmetric(perm),
            features: self.features.permute_rows(perm),
            label: self.label,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphDataset {
    pub name: String,
    pub graphs: Vec<GraphInstance>,
    pub num_classes: usize,
    pub feature_dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetStats {
    pub graphs: usize,
    pub classes: usize,
    pub feature_dim: usize,
    pub mean_nodes: f64,
    pub std_nodes: f64,
    pub mean_edges: f64,
    pub std_edges: f64,
}

impl GraphDataset {
    pub fn new(
        name: impl Into<String>,
        graphs: Vec<GraphInstance>,
        num_classes: usize,
    ) -> Result<Self, GraphIoError> {
        let name = name.into();
        let feature_dim = graphs.first().map_or(0, GraphInstance::feature_dim);
        for (g, graph) in graphs.iter().enumerate() {
            if graph.feature_dim() != feature_dim {
                return Err(GraphIoError::Invalid(format!(
                    "graph {g} has {} features, dataset has {feature_dim}",
                    graph.feature_dim()
                )));
            }
            if graph.label() >= num_classes {
                return Err(GraphIoError::Invalid(format!(
                    "graph {g} label {} >= {num_classes} classes",
                    graph.label()
                )));
            }
        }
        Ok(Self {
            name,
            graphs,
            num_classes,
            feature_dim,
        })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn stats(&self) -> DatasetStats {
        let nodes: Vec<f64> = self.graphs.iter().map(|g| g.node_count() as f64).collect();
        let edges: Vec<f64> = self.graphs.iter().map(|g| g.edge_count() as f64).collect();
        let (mean_nodes, std_nodes) = mean_std(&nodes);
        let (mean_edges, std_edges) = mean_std(&edges);
        DatasetStats {
            graphs: self.len(),
            classes: self.num_classes,
            feature_dim: self.feature_dim,
            mean_nodes,
            std_nodes,
            mean_edges,
            std_edges,
        }
    }

    /// Per-class graph counts.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for g in &self.graphs {
            counts[g.label()] += 1;
        }
        counts
    }

    pub fn mean_node_count(&self) -> f64 {
        self.stats().mean_nodes
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Constant-one node features for graphs without attributes or labels.
pub fn impute_features(node_count: usize) -> Matrix {
    Matrix::ones(node_count, 1)
}
