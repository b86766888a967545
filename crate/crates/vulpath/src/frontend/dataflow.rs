//! Def/use extraction and reaching definitions.
//!
//! Variables are syntactic tokens: a write through pointer `p` (or into
//! array `a`) defines the token `*p` (`*a`) and a subscript or dereference
//! read uses both the pointer and its token. Copy/format primitives that
//! write through their first argument (memmove, strcpy, memset, ...)
//! define that argument's token, which is what lets dependence chains run
//! through buffer-filling calls. There is no alias analysis: tokens are
//! compared textually.

use super::{Ast, CfgView, CpgEdge, EdgeKind, NodeId, NodeKind};
use std::collections::{BTreeMap, BTreeSet};

/// Calls that write through their first pointer argument.
const PTR_WRITE_APIS: &[&str] = &[
    "memmove", "memcpy", "memset", "strcpy", "strncpy", "strcat", "strncat", "sprintf",
    "snprintf", "wmemcpy", "wcscpy", "gets", "fgets",
];

/// Definitions and uses of one statement, as syntactic tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DefUse {
    pub defs: BTreeSet<String>,
    pub uses: BTreeSet<String>,
}

/// Extract the def/use sets of a statement node.
pub fn def_use(ast: &Ast, stmt: NodeId) -> DefUse {
    let node = ast.node(stmt);
    let mut du = DefUse::default();
    match node.kind {
        NodeKind::Decl => {
            let name = ast.node(node.children[0]).code.clone();
            // a plain `int * p;` carries no value; initializers and array
            // declarators (which allocate storage) count as definitions
            if node.code.contains('=') || node.code.contains('[') {
                du.defs.insert(name);
            }
            for &child in node.children.iter().skip(1) {
                collect_reads(ast, child, &mut du.uses);
            }
        }
        NodeKind::Assign => {
            let target = node.children[0];
            match ast.node(target).kind {
                NodeKind::Identifier => {
                    let name = ast.node(target).code.clone();
                    // compound assignment and ++/-- read the target too
                    if !node.code.contains('=') || node.code.contains("+=")
                        || node.code.contains("-=") || node.code.contains("*=")
                        || node.code.contains("/=") || node.code.contains("%=")
                    {
                        du.uses.insert(name.clone());
                    }
                    du.defs.insert(name);
                }
                NodeKind::ArraySubscript => {
                    let sub = ast.node(target);
                    if let Some(base) = leftmost_identifier(ast, sub.children[0]) {
                        du.defs.insert(format!("*{base}"));
                    }
                    collect_reads(ast, sub.children[0], &mut du.uses);
                    collect_reads(ast, sub.children[1], &mut du.uses);
                }
                NodeKind::PointerDeref => {
                    let deref = ast.node(target);
                    if let Some(base) = leftmost_identifier(ast, deref.children[0]) {
                        du.defs.insert(format!("*{base}"));
                    }
                    collect_reads(ast, deref.children[0], &mut du.uses);
                }
                _ => {
                    collect_reads(ast, target, &mut du.uses);
                }
            }
            for &child in node.children.iter().skip(1) {
                collect_reads(ast, child, &mut du.uses);
            }
        }
        NodeKind::Call | NodeKind::Condition | NodeKind::Return => {
            for &child in &node.children {
                collect_reads(ast, child, &mut du.uses);
            }
        }
        _ => {}
    }
    // calls anywhere in the statement may write through their first argument
    collect_call_writes(ast, stmt, &mut du.defs);
    du
}

/// Leftmost identifier of an expression subtree, skipping casts and parens.
fn leftmost_identifier(ast: &Ast, id: NodeId) -> Option<String> {
    let node = ast.node(id);
    match node.kind {
        NodeKind::Identifier => Some(node.code.clone()),
        NodeKind::Literal => None,
        _ => node
            .children
            .first()
            .and_then(|&c| leftmost_identifier(ast, c)),
    }
}

/// Collect identifiers read within an expression subtree.
fn collect_reads(ast: &Ast, id: NodeId, uses: &mut BTreeSet<String>) {
    let node = ast.node(id);
    match node.kind {
        NodeKind::Identifier => {
            if !super::parser::is_type_word(&node.code) {
                uses.insert(node.code.clone());
            }
        }
        NodeKind::ArraySubscript => {
            if let Some(base) = leftmost_identifier(ast, node.children[0]) {
                uses.insert(format!("*{base}"));
            }
            for &child in &node.children {
                collect_reads(ast, child, uses);
            }
        }
        NodeKind::PointerDeref => {
            if let Some(base) = leftmost_identifier(ast, node.children[0]) {
                uses.insert(format!("*{base}"));
            }
            for &child in &node.children {
                collect_reads(ast, child, uses);
            }
        }
        NodeKind::Call => {
            // the callee name is not a variable read
            for &child in node.children.iter().skip(1) {
                collect_reads(ast, child, uses);
            }
        }
        _ => {
            for &child in &node.children {
                collect_reads(ast, child, uses);
            }
        }
    }
}

/// Record `*arg0` definitions for write-through calls in the subtree.
fn collect_call_writes(ast: &Ast, id: NodeId, defs: &mut BTreeSet<String>) {
    let node = ast.node(id);
    if node.kind == NodeKind::Call {
        let callee = ast.node(node.children[0]).code.clone();
        if PTR_WRITE_APIS.contains(&callee.as_str()) {
            let args = ast.node(node.children[1]);
            if let Some(&first) = args.children.first() {
                if let Some(base) = leftmost_identifier(ast, first) {
                    defs.insert(format!("*{base}"));
                }
            }
        }
    }
    for &child in &node.children {
        collect_call_writes(ast, child, defs);
    }
}

/// Reaching-definition IN sets per CFG node: the least fixed point of the
/// standard forward may-analysis over (token, defining statement) pairs.
pub fn reaching_definitions(
    view: &CfgView,
    def_uses: &BTreeMap<NodeId, DefUse>,
) -> BTreeMap<NodeId, BTreeSet<(String, NodeId)>> {
    type Defs = BTreeSet<(String, NodeId)>;
    let mut in_sets: BTreeMap<NodeId, Defs> = BTreeMap::new();
    let mut out_sets: BTreeMap<NodeId, Defs> = BTreeMap::new();
    for &n in &view.nodes {
        in_sets.insert(n, Defs::new());
        out_sets.insert(n, Defs::new());
    }
    let empty = DefUse::default();
    let mut changed = true;
    while changed {
        changed = false;
        for &n in &view.nodes {
            let mut in_set = Defs::new();
            for p in view.predecessors(n) {
                in_set.extend(out_sets[&p].iter().cloned());
            }
            let du = def_uses.get(&n).unwrap_or(&empty);
            let mut out_set: Defs = in_set
                .iter()
                .filter(|(tok, _)| !du.defs.contains(tok))
                .cloned()
                .collect();
            for def in &du.defs {
                out_set.insert((def.clone(), n));
            }
            if in_set != in_sets[&n] || out_set != out_sets[&n] {
                in_sets.insert(n, in_set);
                out_sets.insert(n, out_set);
                changed = true;
            }
        }
    }
    in_sets
}

/// Data dependence edges: d -> u annotated with token v whenever the
/// definition of v at d reaches u and u uses v.
pub fn build_ddg(
    reach_in: &BTreeMap<NodeId, BTreeSet<(String, NodeId)>>,
    def_uses: &BTreeMap<NodeId, DefUse>,
) -> Vec<CpgEdge> {
    let mut edges: BTreeSet<(NodeId, NodeId, String)> = BTreeSet::new();
    for (&u, du) in def_uses {
        let Some(in_set) = reach_in.get(&u) else {
            continue;
        };
        for (tok, d) in in_set {
            if du.uses.contains(tok) && *d != u {
                edges.insert((*d, u, tok.clone()));
            }
        }
    }
    // one edge per (src, dst): the kinds must not form multigraphs, so
    // when several tokens flow along the same pair the lexicographically
    // smallest annotates the edge
    let mut first_per_pair: BTreeMap<(NodeId, NodeId), String> = BTreeMap::new();
    for (src, dst, var) in edges {
        first_per_pair.entry((src, dst)).or_insert(var);
    }
    first_per_pair
        .into_iter()
        .map(|((src, dst), var)| CpgEdge {
            src,
            dst,
            kind: EdgeKind::Ddg,
            var: Some(var),
        })
        .collect()
}
