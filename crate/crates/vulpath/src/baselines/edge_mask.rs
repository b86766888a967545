//! Edge-mask explainer: learns a real-valued mask over dependence edges by
//! projected gradient descent, minimizing cross entropy between the
//! masked-graph prediction and the original prediction plus an L1 sparsity
//! term. Normalization is frozen at the unmasked graph, so a mask entry
//! scales the corresponding adjacency weights symmetrically.

use crate::frontend::{CodePropertyGraph, EdgeKind, NodeId};
use crate::nn::{AdamState, DetectorModel, NnError, NormAdj};
use ndarray::Array2;
use std::collections::BTreeSet;

#[derive(Debug, Clone)]
pub struct EdgeMaskConfig {
    pub lambda: f64,
    pub steps: usize,
    pub lr: f64,
    /// Number of reported lines.
    pub top_k: usize,
}

impl Default for EdgeMaskConfig {
    fn default() -> Self {
        EdgeMaskConfig {
            lambda: 0.05,
            steps: 200,
            lr: 0.05,
            top_k: 10,
        }
    }
}

/// Result of one mask optimization.
#[derive(Debug, Clone)]
pub struct EdgeMaskOutcome {
    /// Statement lines incident to the strongest masked edges (up to k).
    pub lines: Vec<u32>,
    /// Masked-graph probability after the final step.
    pub masked_probability: f64,
    /// Original (unmasked) probability.
    pub original_probability: f64,
    /// Final mask per dependence edge, aligned with `edges`.
    pub mask: Vec<f64>,
    /// Undirected statement pairs the mask ranges over, as (row, row).
    pub edges: Vec<(u32, u32)>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Optimize the edge mask and report the top-k incident statement lines.
pub fn edge_mask_explain(
    cpg: &CodePropertyGraph,
    features: &Array2<f64>,
    detector: &DetectorModel,
    config: &EdgeMaskConfig,
) -> Result<EdgeMaskOutcome, NnError> {
    let ids = cpg.ordered_node_ids();
    let row_of = |id: NodeId| ids.binary_search(&id).expect("node id in graph") as u32;
    let statement_rows: Vec<usize> = ids
        .iter()
        .enumerate()
        .filter(|(_, id)| cpg.node(**id).map(|n| n.is_statement).unwrap_or(false))
        .map(|(row, _)| row)
        .collect();
    if statement_rows.is_empty() {
        return Err(NnError::EmptyGraph);
    }

    let base = NormAdj::from_cpg(cpg);
    let original_probability = {
        let (score, _) = detector.score_adjacency_gradient(&base, features, &statement_rows);
        sigmoid(score)
    };

    // maskable edges: undirected dependence pairs between statements
    let mut pairs: BTreeSet<(u32, u32)> = BTreeSet::new();
    for edge in &cpg.edges {
        if matches!(edge.kind, EdgeKind::Ddg | EdgeKind::Cdg) && edge.src != edge.dst {
            let (a, b) = (row_of(edge.src), row_of(edge.dst));
            pairs.insert((a.min(b), a.max(b)));
        }
    }
    let edges: Vec<(u32, u32)> = pairs.into_iter().collect();
    if edges.is_empty() {
        return Ok(EdgeMaskOutcome {
            lines: Vec::new(),
            masked_probability: original_probability,
            original_probability,
            mask: Vec::new(),
            edges,
        });
    }

    let mut mask = Array2::from_elem((edges.len(), 1), 0.5);
    let mut adam = AdamState::new(config.lr, &[(edges.len(), 1)]);
    let base_weight = |a: u32, b: u32| {
        base.entries
            .iter()
            .find(|&&(r, c, _)| r == a && c == b)
            .map(|&(_, _, w)| w)
            .unwrap_or(0.0)
    };

    let mut masked_probability = original_probability;
    for _ in 0..config.steps {
        let masked = apply_mask(&base, &edges, &mask);
        let (score, dadj) =
            detector.score_adjacency_gradient(&masked, features, &statement_rows);
        let p = sigmoid(score);
        masked_probability = p;
        // d/dscore of CE(original, sigmoid(score)) is p - p*
        let dscore = p - original_probability;
        let mut grad = Array2::zeros((edges.len(), 1));
        for (e, &(a, b)) in edges.iter().enumerate() {
            let g = base_weight(a, b) * dadj[[a as usize, b as usize]]
                + base_weight(b, a) * dadj[[b as usize, a as usize]];
            grad[[e, 0]] = dscore * g + config.lambda;
        }
        adam.step(&mut [&mut mask], &[grad]);
        for v in mask.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
    }

    // rank edges by mask value and collect incident statement lines until
    // k distinct lines are gathered; fully-masked-out edges are skipped
    let mut ranked: Vec<usize> = (0..edges.len()).collect();
    ranked.sort_by(|&a, &b| {
        mask[[b, 0]]
            .partial_cmp(&mask[[a, 0]])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut lines: Vec<u32> = Vec::new();
    for &e in &ranked {
        if mask[[e, 0]] <= 1e-6 {
            break;
        }
        let (a, b) = edges[e];
        for row in [a, b] {
            let line = cpg.node(ids[row as usize]).map(|n| n.line).unwrap_or(0);
            if line > 0 && !lines.contains(&line) && lines.len() < config.top_k {
                lines.push(line);
            }
        }
        if lines.len() >= config.top_k {
            break;
        }
    }
    lines.sort_unstable();

    let final_mask = mask.column(0).to_vec();
    Ok(EdgeMaskOutcome {
        lines,
        masked_probability,
        original_probability,
        mask: final_mask,
        edges,
    })
}

fn apply_mask(base: &NormAdj, edges: &[(u32, u32)], mask: &Array2<f64>) -> NormAdj {
    let mut entries = base.entries.clone();
    for (e, &(a, b)) in edges.iter().enumerate() {
        let m = mask[[e, 0]];
        for entry in entries.iter_mut() {
            if (entry.0 == a && entry.1 == b) || (entry.0 == b && entry.1 == a) {
                entry.2 *= m;
            }
        }
    }
    NormAdj {
        n: base.n,
        entries,
    }
}
