//! Backward slicing and candidate-path enumeration over dependence edges.
//! Slicing walks DDG and CDG edges only; a path source is a dependence
//! root (a statement with no incoming dependence edge), and paths are
//! simple, reported source-first, and enumerated in a deterministic DFS
//! order (predecessors ascending by node id).

use crate::frontend::{CodePropertyGraph, EdgeKind, NodeId};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SliceError {
    #[error("node {0} is not a statement node")]
    NotAStatement(NodeId),
}

/// An ordered statement chain ending at a sink.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidatePath {
    pub nodes: Vec<NodeId>,
    pub lines: Vec<u32>,
    pub sink: NodeId,
}

/// Dependence predecessors (DDG union CDG) per statement node.
fn dependence_predecessors(cpg: &CodePropertyGraph) -> BTreeMap<NodeId, Vec<NodeId>> {
    let mut preds: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for edge in &cpg.edges {
        if matches!(edge.kind, EdgeKind::Ddg | EdgeKind::Cdg) {
            preds.entry(edge.dst).or_default().push(edge.src);
        }
    }
    for list in preds.values_mut() {
        list.sort_unstable();
        list.dedup();
    }
    preds
}

fn ensure_statement(cpg: &CodePropertyGraph, sink: NodeId) -> Result<(), SliceError> {
    match cpg.node(sink) {
        Some(node) if node.is_statement => Ok(()),
        _ => Err(SliceError::NotAStatement(sink)),
    }
}

/// All statement nodes from which the sink is reachable via forward
/// dependence edges, plus the sink itself.
pub fn backward_slice(
    cpg: &CodePropertyGraph,
    sink: NodeId,
) -> Result<BTreeSet<NodeId>, SliceError> {
    ensure_statement(cpg, sink)?;
    let preds = dependence_predecessors(cpg);
    let mut slice: BTreeSet<NodeId> = BTreeSet::new();
    let mut stack = vec![sink];
    slice.insert(sink);
    while let Some(node) = stack.pop() {
        if let Some(list) = preds.get(&node) {
            for &p in list {
                if slice.insert(p) {
                    stack.push(p);
                }
            }
        }
    }
    Ok(slice)
}

/// Enumerate simple dependence paths ending at `sink` whose source end is
/// a dependence root, bounded by `max_depth` nodes per path and truncated
/// after `max_paths` paths.
pub fn enumerate_paths(
    cpg: &CodePropertyGraph,
    sink: NodeId,
    max_depth: usize,
    max_paths: usize,
) -> Result<Vec<CandidatePath>, SliceError> {
    ensure_statement(cpg, sink)?;
    assert!(max_depth >= 1, "max_depth must be at least 1");
    let preds = dependence_predecessors(cpg);
    let mut out = Vec::new();
    // DFS backwards from the sink; `chain` is sink-first
    let mut chain = vec![sink];
    let mut on_chain: BTreeSet<NodeId> = std::iter::once(sink).collect();
    dfs(
        cpg, &preds, max_depth, max_paths, &mut chain, &mut on_chain, &mut out,
    );
    Ok(out)
}

fn dfs(
    cpg: &CodePropertyGraph,
    preds: &BTreeMap<NodeId, Vec<NodeId>>,
    max_depth: usize,
    max_paths: usize,
    chain: &mut Vec<NodeId>,
    on_chain: &mut BTreeSet<NodeId>,
    out: &mut Vec<CandidatePath>,
) {
    if out.len() >= max_paths {
        return;
    }
    let current = *chain.last().expect("chain never empty");
    let incoming = preds.get(&current).map(Vec::as_slice).unwrap_or(&[]);
    if incoming.is_empty() {
        let nodes: Vec<NodeId> = chain.iter().rev().copied().collect();
        let lines = nodes
            .iter()
            .map(|&id| cpg.node(id).map(|n| n.line).unwrap_or(0))
            .collect();
        out.push(CandidatePath {
            nodes,
            lines,
            sink: chain[0],
        });
        return;
    }
    if chain.len() >= max_depth {
        return;
    }
    for &p in incoming {
        if on_chain.contains(&p) {
            continue;
        }
        chain.push(p);
        on_chain.insert(p);
        dfs(cpg, preds, max_depth, max_paths, chain, on_chain, out);
        chain.pop();
        on_chain.remove(&p);
        if out.len() >= max_paths {
            return;
        }
    }
}
