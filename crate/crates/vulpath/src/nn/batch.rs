//! Graph batching: block-diagonal adjacency over stacked node features,
//! with per-graph statement row indices so node losses and graph pooling
//! can find their rows. Batch-norm statistics during training are computed
//! over all nodes of the batch.

use super::NormAdj;
use ndarray::Array2;

/// One graph ready for the models: normalized adjacency, node features,
/// which rows are statements, their labels, and the graph label.
#[derive(Debug, Clone)]
pub struct PreparedGraph {
    pub id: String,
    pub adj: NormAdj,
    pub features: Array2<f64>,
    /// Feature-row indices of statement nodes.
    pub statement_rows: Vec<usize>,
    /// Sink labels aligned with `statement_rows`.
    pub statement_labels: Vec<bool>,
    /// Graph-level vulnerability label.
    pub vulnerable: bool,
}

/// A block-diagonal batch of graphs.
pub struct BatchedGraphs {
    pub adj: NormAdj,
    pub features: Array2<f64>,
    /// Global statement rows per graph, in input order.
    pub statement_rows: Vec<Vec<usize>>,
    pub statement_labels: Vec<Vec<bool>>,
    pub graph_labels: Vec<bool>,
}

impl BatchedGraphs {
    pub fn build(graphs: &[&PreparedGraph]) -> BatchedGraphs {
        let total: usize = graphs.iter().map(|g| g.adj.n).sum();
        let dims = graphs.first().map(|g| g.features.ncols()).unwrap_or(0);
        let mut features = Array2::zeros((total, dims));
        let mut entries = Vec::new();
        let mut statement_rows = Vec::with_capacity(graphs.len());
        let mut statement_labels = Vec::with_capacity(graphs.len());
        let mut graph_labels = Vec::with_capacity(graphs.len());
        let mut offset = 0usize;
        for graph in graphs {
            for (r, c, w) in &graph.adj.entries {
                entries.push((*r + offset as u32, *c + offset as u32, *w));
            }
            features
                .slice_mut(ndarray::s![offset..offset + graph.adj.n, ..])
                .assign(&graph.features);
            statement_rows.push(
                graph
                    .statement_rows
                    .iter()
                    .map(|&r| r + offset)
                    .collect::<Vec<_>>(),
            );
            statement_labels.push(graph.statement_labels.clone());
            graph_labels.push(graph.vulnerable);
            offset += graph.adj.n;
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));
        BatchedGraphs {
            adj: NormAdj { n: total, entries },
            features,
            statement_rows,
            statement_labels,
            graph_labels,
        }
    }

    /// Flattened statement rows and labels across the batch.
    pub fn flat_statements(&self) -> (Vec<usize>, Vec<usize>) {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (graph_rows, graph_labels) in self.statement_rows.iter().zip(&self.statement_labels) {
            for (&r, &y) in graph_rows.iter().zip(graph_labels) {
                rows.push(r);
                labels.push(y as usize);
            }
        }
        (rows, labels)
    }
}

/// Duplicate the minority side (graphs with vs. without positive sink
/// nodes) round-robin until both sides are equally represented. Returns
/// indices into `graphs`.
pub fn oversample_to_parity(graphs: &[PreparedGraph]) -> Vec<usize> {
    let with: Vec<usize> = (0..graphs.len())
        .filter(|&i| graphs[i].statement_labels.iter().any(|&y| y))
        .collect();
    let without: Vec<usize> = (0..graphs.len())
        .filter(|&i| !graphs[i].statement_labels.iter().any(|&y| y))
        .collect();
    let mut order: Vec<usize> = (0..graphs.len()).collect();
    let (minority, majority) = if with.len() < without.len() {
        (&with, &without)
    } else {
        (&without, &with)
    };
    if minority.is_empty() || majority.is_empty() {
        return order;
    }
    let deficit = majority.len() - minority.len();
    for k in 0..deficit {
        order.push(minority[k % minority.len()]);
    }
    order
}
