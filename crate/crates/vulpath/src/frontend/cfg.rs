//! Statement-level control flow construction. Conditions get exactly two
//! successors (then-entry and else-entry/join); loop conditions additionally
//! receive a back edge from the last body statement.

use super::{Ast, CpgEdge, EdgeKind, NodeId, NodeKind};
use std::collections::BTreeSet;

/// Build CFG edges over the statement nodes of `ast`, anchored at the given
/// virtual entry and exit ids.
pub fn build_cfg(ast: &Ast, entry: NodeId, exit: NodeId) -> Vec<CpgEdge> {
    let mut edges: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();
    let root = ast.node(ast.root);
    let body = root
        .children
        .iter()
        .copied()
        .find(|&c| ast.node(c).kind == NodeKind::Block);
    let frontier = match body {
        Some(body) => flow(ast, body, vec![entry], exit, &mut edges),
        None => vec![entry],
    };
    for f in frontier {
        edges.insert((f, exit));
    }
    edges
        .into_iter()
        .map(|(src, dst)| CpgEdge {
            src,
            dst,
            kind: EdgeKind::Cfg,
            var: None,
        })
        .collect()
}

/// Thread control flow through one statement; returns the new frontier
/// (statements whose successor is the next statement in sequence).
fn flow(
    ast: &Ast,
    id: NodeId,
    frontier: Vec<NodeId>,
    exit: NodeId,
    edges: &mut BTreeSet<(NodeId, NodeId)>,
) -> Vec<NodeId> {
    let node = ast.node(id);
    match node.kind {
        NodeKind::Block => {
            let mut current = frontier;
            for &child in &node.children {
                current = flow(ast, child, current, exit, edges);
            }
            current
        }
        NodeKind::Decl | NodeKind::Assign | NodeKind::Call => {
            connect(&frontier, id, edges);
            vec![id]
        }
        NodeKind::Return => {
            connect(&frontier, id, edges);
            edges.insert((id, exit));
            Vec::new()
        }
        NodeKind::If => {
            let cond = node.children[0];
            connect(&frontier, cond, edges);
            let is_loop = node.code != "if";
            if is_loop {
                let body_exits = flow(ast, node.children[1], vec![cond], exit, edges);
                for b in body_exits {
                    edges.insert((b, cond));
                }
                vec![cond]
            } else {
                let mut joined = flow(ast, node.children[1], vec![cond], exit, edges);
                match node.children.get(2) {
                    Some(&else_node) => {
                        let arm = ast.node(else_node).children[0];
                        joined.extend(flow(ast, arm, vec![cond], exit, edges));
                    }
                    None => joined.push(cond),
                }
                joined.sort_unstable();
                joined.dedup();
                joined
            }
        }
        // non-statement constructs carry no flow of their own
        _ => frontier,
    }
}

fn connect(frontier: &[NodeId], to: NodeId, edges: &mut BTreeSet<(NodeId, NodeId)>) {
    for &f in frontier {
        edges.insert((f, to));
    }
}
