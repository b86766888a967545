//! Reference competitors: a rule-based sink identifier over syntactic
//! categories (sensitive API calls, array usage, pointer usage, arithmetic
//! feeding an index or size argument) and a gradient-optimized edge-mask
//! explainer over dependence edges.

mod edge_mask;

pub use edge_mask::{edge_mask_explain, EdgeMaskConfig};

use crate::frontend::{CodePropertyGraph, EdgeKind, NodeId, NodeKind};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Rule category that fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SinkRule {
    ApiCall,
    ArrayUsage,
    PointerUsage,
    Arithmetic,
}

/// One rule firing on one node.
#[derive(Debug, Clone, Serialize)]
pub struct SinkRuleHit {
    pub node: NodeId,
    pub line: u32,
    pub rule: SinkRule,
}

/// Default sensitive-API inventory for the ApiCall rule.
pub fn default_sensitive_apis() -> Vec<String> {
    ["memcpy", "memmove", "strcpy", "strcat", "sprintf", "alloca"]
        .into_iter()
        .map(String::from)
        .collect()
}

fn parent_map(cpg: &CodePropertyGraph) -> BTreeMap<NodeId, NodeId> {
    cpg.edges_of_kind(EdgeKind::Ast)
        .map(|e| (e.dst, e.src))
        .collect()
}

fn callee_of<'a>(cpg: &'a CodePropertyGraph, call: NodeId) -> Option<&'a str> {
    cpg.edges_of_kind(EdgeKind::Ast)
        .filter(|e| e.src == call)
        .filter_map(|e| cpg.node(e.dst))
        .find(|n| n.kind == NodeKind::Identifier)
        .map(|n| n.code.as_str())
}

/// Purely syntactic sink candidates: deterministic in the CPG alone.
pub fn rule_based_sinks(cpg: &CodePropertyGraph, sensitive_apis: &[String]) -> Vec<SinkRuleHit> {
    let parents = parent_map(cpg);
    let mut hits = Vec::new();
    for node in &cpg.nodes {
        match node.kind {
            NodeKind::Call => {
                if let Some(callee) = callee_of(cpg, node.id) {
                    if sensitive_apis.iter().any(|api| api == callee) {
                        hits.push(SinkRuleHit {
                            node: node.id,
                            line: node.line,
                            rule: SinkRule::ApiCall,
                        });
                    }
                }
            }
            NodeKind::ArraySubscript => {
                hits.push(SinkRuleHit {
                    node: node.id,
                    line: node.line,
                    rule: SinkRule::ArrayUsage,
                });
            }
            NodeKind::PointerDeref => {
                hits.push(SinkRuleHit {
                    node: node.id,
                    line: node.line,
                    rule: SinkRule::PointerUsage,
                });
            }
            NodeKind::BinaryOp => {
                if has_arithmetic_operator(&node.code)
                    && feeds_index_or_size_argument(cpg, &parents, node.id, sensitive_apis)
                {
                    hits.push(SinkRuleHit {
                        node: node.id,
                        line: node.line,
                        rule: SinkRule::Arithmetic,
                    });
                }
            }
            _ => {}
        }
    }
    hits.sort_by_key(|h| (h.node, h.rule as u8));
    hits
}

/// Arithmetic operator present outside quotes.
fn has_arithmetic_operator(code: &str) -> bool {
    let mut in_quote: Option<char> = None;
    for c in code.chars() {
        match in_quote {
            Some(q) => {
                if c == q {
                    in_quote = None;
                }
            }
            None => match c {
                '\'' | '"' => in_quote = Some(c),
                '+' | '-' | '*' | '/' | '%' => return true,
                _ => {}
            },
        }
    }
    false
}

/// True when the node sits under an array subscript or inside the argument
/// list of a sensitive call.
fn feeds_index_or_size_argument(
    cpg: &CodePropertyGraph,
    parents: &BTreeMap<NodeId, NodeId>,
    node: NodeId,
    sensitive_apis: &[String],
) -> bool {
    let mut current = node;
    while let Some(&parent) = parents.get(&current) {
        match cpg.node(parent).map(|n| n.kind) {
            Some(NodeKind::ArraySubscript) => return true,
            Some(NodeKind::ArgList) => {
                if let Some(&call) = parents.get(&parent) {
                    if let Some(callee) = callee_of(cpg, call) {
                        if sensitive_apis.iter().any(|api| api == callee) {
                            return true;
                        }
                    }
                }
            }
            _ => {}
        }
        current = parent;
    }
    false
}

/// Statement nodes enclosing the given rule hits, ascending.
pub fn rule_sink_statements(cpg: &CodePropertyGraph, hits: &[SinkRuleHit]) -> Vec<NodeId> {
    let parents = parent_map(cpg);
    let mut statements: BTreeSet<NodeId> = BTreeSet::new();
    for hit in hits {
        let mut current = hit.node;
        loop {
            if cpg.node(current).map(|n| n.is_statement).unwrap_or(false) {
                statements.insert(current);
                break;
            }
            match parents.get(&current) {
                Some(&parent) => current = parent,
                None => break,
            }
        }
    }
    statements.into_iter().collect()
}
