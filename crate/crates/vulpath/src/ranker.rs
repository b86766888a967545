//! Path scoring and explanation selection. Every candidate path's induced
//! subgraph is scored by the detector; the importance of a path is
//! 1 - (p_G - p_g), so for a fixed whole-graph score the ranking is by the
//! subgraph score alone. Importance may exceed 1 when p_g > p_G; values
//! are reported unclamped.

use crate::frontend::{CodePropertyGraph, CpgEdge, EdgeKind, NodeId};
use crate::nn::{DetectorModel, NnError, NormAdj};
use crate::slicer::CandidatePath;
use ndarray::Array2;
use serde::Serialize;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RankError {
    #[error("no candidate paths to rank")]
    NoPaths,
    #[error("path references node {0} outside the graph")]
    InvalidPath(NodeId),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// A scored candidate path.
#[derive(Debug, Clone, Serialize)]
pub struct ScoredPath {
    pub lines: Vec<u32>,
    #[serde(skip)]
    pub nodes: Vec<NodeId>,
    pub p_g: f64,
    pub importance: f64,
}

/// The chosen path plus ranked alternatives for one function.
#[derive(Debug, Clone, Serialize)]
pub struct Explanation {
    pub function: String,
    pub p_g_whole: f64,
    pub chosen: ScoredPath,
    pub alternatives: Vec<ScoredPath>,
}

/// Importance score of a path's subgraph probability against the whole
/// graph's probability.
pub fn importance_score(p_whole: f64, p_sub: f64) -> f64 {
    1.0 - (p_whole - p_sub)
}

/// Whole-graph probability under the detector (eval mode).
pub fn graph_probability(
    cpg: &CodePropertyGraph,
    features: &Array2<f64>,
    detector: &DetectorModel,
) -> Result<f64, NnError> {
    crate::nn::detector_forward(cpg, features, detector)
}

/// Induced subgraph over the path's statement nodes plus their AST
/// descendants; all edge kinds restricted to retained nodes. Entry and
/// exit map to the path's endpoints.
pub fn path_subgraph(
    cpg: &CodePropertyGraph,
    path: &CandidatePath,
) -> Result<CodePropertyGraph, RankError> {
    let mut keep: BTreeSet<NodeId> = BTreeSet::new();
    for &node in &path.nodes {
        if cpg.node(node).is_none() {
            return Err(RankError::InvalidPath(node));
        }
        keep.insert(node);
    }
    // pull in AST descendants of every path statement
    let mut stack: Vec<NodeId> = path.nodes.clone();
    while let Some(node) = stack.pop() {
        for edge in cpg.edges_of_kind(EdgeKind::Ast) {
            if edge.src == node && keep.insert(edge.dst) {
                stack.push(edge.dst);
            }
        }
    }
    let nodes = cpg
        .nodes
        .iter()
        .filter(|n| keep.contains(&n.id))
        .cloned()
        .collect();
    let edges: Vec<CpgEdge> = cpg
        .edges
        .iter()
        .filter(|e| keep.contains(&e.src) && keep.contains(&e.dst))
        .cloned()
        .collect();
    Ok(CodePropertyGraph {
        function_name: cpg.function_name.clone(),
        nodes,
        edges,
        entry: path.nodes[0],
        exit: path.sink,
    })
}

/// Score one path: detector probability of its induced subgraph, feature
/// rows reused from the whole-graph feature matrix.
fn score_path(
    cpg: &CodePropertyGraph,
    features: &Array2<f64>,
    detector: &DetectorModel,
    p_whole: f64,
    path: &CandidatePath,
) -> Result<ScoredPath, RankError> {
    let sub = path_subgraph(cpg, path)?;
    let full_ids = cpg.ordered_node_ids();
    let sub_ids = sub.ordered_node_ids();
    let mut sub_features = Array2::zeros((sub_ids.len(), features.ncols()));
    for (row, id) in sub_ids.iter().enumerate() {
        let full_row = full_ids
            .binary_search(id)
            .map_err(|_| RankError::InvalidPath(*id))?;
        sub_features.row_mut(row).assign(&features.row(full_row));
    }
    let statement_rows: Vec<usize> = sub_ids
        .iter()
        .enumerate()
        .filter(|(_, id)| sub.node(**id).map(|n| n.is_statement).unwrap_or(false))
        .map(|(row, _)| row)
        .collect();
    let adj = NormAdj::from_cpg(&sub);
    let p_sub = detector.probability(&adj, &sub_features, &statement_rows)?;
    Ok(ScoredPath {
        lines: path.lines.clone(),
        nodes: path.nodes.clone(),
        p_g: p_sub,
        importance: importance_score(p_whole, p_sub),
    })
}

/// Score all paths and choose the highest-importance one. Ties break to
/// the shorter path, then the lexicographically smaller line sequence.
pub fn select_explanation(
    cpg: &CodePropertyGraph,
    paths: &[CandidatePath],
    features: &Array2<f64>,
    detector: &DetectorModel,
) -> Result<Explanation, RankError> {
    if paths.is_empty() {
        return Err(RankError::NoPaths);
    }
    let p_whole = graph_probability(cpg, features, detector)?;
    let mut scored = Vec::with_capacity(paths.len());
    for path in paths {
        scored.push(score_path(cpg, features, detector, p_whole, path)?);
    }
    scored.sort_by(|a, b| {
        b.importance
            .partial_cmp(&a.importance)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.lines.len().cmp(&b.lines.len()))
            .then(a.lines.cmp(&b.lines))
    });
    let chosen = scored.remove(0);
    Ok(Explanation {
        function: cpg.function_name.clone(),
        p_g_whole: p_whole,
        chosen,
        alternatives: scored,
    })
}

/// Explanation report document per the external interface.
pub fn explanation_to_json(explanation: &Explanation) -> serde_json::Value {
    let path_json = |p: &ScoredPath| {
        serde_json::json!({
            "lines": p.lines,
            "p_g": p.p_g,
            "importance": p.importance,
        })
    };
    serde_json::json!({
        "function": explanation.function,
        "p_G": explanation.p_g_whole,
        "chosen": path_json(&explanation.chosen),
        "alternatives": explanation.alternatives.iter().map(path_json).collect::<Vec<_>>(),
    })
}
