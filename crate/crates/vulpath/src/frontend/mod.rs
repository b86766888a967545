//! C-subset frontend: parse one function and build its code property graph.
//!
//! The code property graph unifies four edge kinds over a single node set:
//! AST edges from the parse tree, a statement-level control flow graph,
//! control dependences derived from post-dominators, and data dependences
//! derived from reaching definitions. Two virtual nodes (entry and exit,
//! kind `Function`, line 0) anchor the control flow graph.

mod cdg;
mod cfg;
mod dataflow;
mod json;
mod lexer;
mod parser;
mod postdom;

pub use cdg::build_cdg;
pub use cfg::build_cfg;
pub use dataflow::{build_ddg, def_use, reaching_definitions, DefUse};
pub use json::{cpg_from_json, cpg_to_json};
pub use parser::parse_function;
pub use postdom::post_dominators;

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Node identifier, unique within one function's graph.
pub type NodeId = u32;

/// Syntactic category of an AST / CPG node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Function,
    ParamList,
    Param,
    Block,
    Decl,
    Assign,
    If,
    Else,
    Call,
    ArgList,
    ArraySubscript,
    PointerDeref,
    BinaryOp,
    UnaryOp,
    Identifier,
    Literal,
    Return,
    Condition,
}

impl NodeKind {
    /// Name used in token streams and JSON documents.
    pub fn name(&self) -> &'static str {
        match self {
            NodeKind::Function => "Function",
            NodeKind::ParamList => "ParamList",
            NodeKind::Param => "Param",
            NodeKind::Block => "Block",
            NodeKind::Decl => "Decl",
            NodeKind::Assign => "Assign",
            NodeKind::If => "If",
            NodeKind::Else => "Else",
            NodeKind::Call => "Call",
            NodeKind::ArgList => "ArgList",
            NodeKind::ArraySubscript => "ArraySubscript",
            NodeKind::PointerDeref => "PointerDeref",
            NodeKind::BinaryOp => "BinaryOp",
            NodeKind::UnaryOp => "UnaryOp",
            NodeKind::Identifier => "Identifier",
            NodeKind::Literal => "Literal",
            NodeKind::Return => "Return",
            NodeKind::Condition => "Condition",
        }
    }

    fn from_name(name: &str) -> Option<NodeKind> {
        Some(match name {
            "Function" => NodeKind::Function,
            "ParamList" => NodeKind::ParamList,
            "Param" => NodeKind::Param,
            "Block" => NodeKind::Block,
            "Decl" => NodeKind::Decl,
            "Assign" => NodeKind::Assign,
            "If" => NodeKind::If,
            "Else" => NodeKind::Else,
            "Call" => NodeKind::Call,
            "ArgList" => NodeKind::ArgList,
            "ArraySubscript" => NodeKind::ArraySubscript,
            "PointerDeref" => NodeKind::PointerDeref,
            "BinaryOp" => NodeKind::BinaryOp,
            "UnaryOp" => NodeKind::UnaryOp,
            "Identifier" => NodeKind::Identifier,
            "Literal" => NodeKind::Literal,
            "Return" => NodeKind::Return,
            "Condition" => NodeKind::Condition,
            _ => return None,
        })
    }
}

/// One node of the parse tree. `code` is the source text of the node
/// (container nodes carry a compact header instead of their full span).
#[derive(Debug, Clone)]
pub struct AstNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub code: String,
    pub line: u32,
    pub children: Vec<NodeId>,
}

/// Arena-allocated AST of a single function; node ids index `nodes`.
#[derive(Debug, Clone)]
pub struct Ast {
    pub nodes: Vec<AstNode>,
    pub root: NodeId,
    pub function_name: String,
}

impl Ast {
    pub fn node(&self, id: NodeId) -> &AstNode {
        &self.nodes[id as usize]
    }

    /// Ids of statement-granularity nodes in id order: declarations,
    /// assignments, expression-statement calls, branch conditions, returns.
    pub fn statement_ids(&self) -> Vec<NodeId> {
        let mut out = Vec::new();
        for node in &self.nodes {
            if self.is_statement(node.id) {
                out.push(node.id);
            }
        }
        out
    }

    /// A call is a statement only in expression-statement position
    /// (direct child of a block); nested calls are plain expressions.
    pub fn is_statement(&self, id: NodeId) -> bool {
        match self.node(id).kind {
            NodeKind::Decl | NodeKind::Assign | NodeKind::Return | NodeKind::Condition => true,
            NodeKind::Call => self
                .nodes
                .iter()
                .any(|parent| parent.kind == NodeKind::Block && parent.children.contains(&id)),
            _ => false,
        }
    }
}

/// Node of the code property graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CpgNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub code: String,
    pub line: u32,
    pub is_statement: bool,
}

/// Edge kind of the code property graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    #[serde(rename = "AST")]
    Ast,
    #[serde(rename = "CFG")]
    Cfg,
    #[serde(rename = "CDG")]
    Cdg,
    #[serde(rename = "DDG")]
    Ddg,
}

/// Directed edge; `var` names the flowing variable on DDG edges.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CpgEdge {
    pub src: NodeId,
    pub dst: NodeId,
    pub kind: EdgeKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub var: Option<String>,
}

/// Code property graph of one function.
///
/// Immutable after construction; safe to share read-only across workers.
#[derive(Debug, Clone, PartialEq)]
pub struct CodePropertyGraph {
    pub function_name: String,
    pub nodes: Vec<CpgNode>,
    pub edges: Vec<CpgEdge>,
    pub entry: NodeId,
    pub exit: NodeId,
}

impl CodePropertyGraph {
    pub fn node(&self, id: NodeId) -> Option<&CpgNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Node ids in ascending order; the canonical row order for feature
    /// matrices and adjacency construction.
    pub fn ordered_node_ids(&self) -> Vec<NodeId> {
        let mut ids: Vec<NodeId> = self.nodes.iter().map(|n| n.id).collect();
        ids.sort_unstable();
        ids
    }

    /// Statement node ids in ascending order.
    pub fn statement_ids(&self) -> Vec<NodeId> {
        let mut ids: Vec<NodeId> = self
            .nodes
            .iter()
            .filter(|n| n.is_statement)
            .map(|n| n.id)
            .collect();
        ids.sort_unstable();
        ids
    }

    pub fn edges_of_kind(&self, kind: EdgeKind) -> impl Iterator<Item = &CpgEdge> {
        self.edges.iter().filter(move |e| e.kind == kind)
    }

    /// Statement node at the given 1-based source line, if any.
    pub fn statement_at_line(&self, line: u32) -> Option<NodeId> {
        self.nodes
            .iter()
            .filter(|n| n.is_statement && n.line == line)
            .map(|n| n.id)
            .min()
    }
}

/// Statement-level control flow view used by the dependence analyses.
/// Kept independent of the CPG so random graphs can drive the same code.
#[derive(Debug, Clone)]
pub struct CfgView {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<(NodeId, NodeId)>,
    pub entry: NodeId,
    pub exit: NodeId,
}

impl CfgView {
    pub fn predecessors(&self, id: NodeId) -> Vec<NodeId> {
        let mut preds: Vec<NodeId> = self
            .edges
            .iter()
            .filter(|(_, d)| *d == id)
            .map(|(s, _)| *s)
            .collect();
        preds.sort_unstable();
        preds.dedup();
        preds
    }

    pub fn successors(&self, id: NodeId) -> Vec<NodeId> {
        let mut succs: Vec<NodeId> = self
            .edges
            .iter()
            .filter(|(s, _)| *s == id)
            .map(|(_, d)| *d)
            .collect();
        succs.sort_unstable();
        succs.dedup();
        succs
    }
}

/// Frontend failure modes.
#[derive(Debug, Error)]
pub enum FrontendError {
    #[error("syntax error at line {line}, column {col}: {message}")]
    Syntax { line: u32, col: u32, message: String },
    #[error("unsupported construct at line {line}: {construct}")]
    UnsupportedConstruct { line: u32, construct: String },
    #[error("nodes cannot reach the exit: {0:?}")]
    UnreachableExit(Vec<NodeId>),
    #[error("schema violation at {path}: {message}")]
    Schema { path: String, message: String },
}

/// Parse a function and assemble its full code property graph.
pub fn build_cpg(source: &str) -> Result<CodePropertyGraph, FrontendError> {
    let ast = parse_function(source)?;
    build_cpg_from_ast(&ast)
}

/// Assemble the CPG for an already-parsed function.
pub fn build_cpg_from_ast(ast: &Ast) -> Result<CodePropertyGraph, FrontendError> {
    let max_id = ast.nodes.iter().map(|n| n.id).max().unwrap_or(0);
    let entry = max_id + 1;
    let exit = max_id + 2;

    let mut nodes: Vec<CpgNode> = ast
        .nodes
        .iter()
        .map(|n| CpgNode {
            id: n.id,
            kind: n.kind,
            code: n.code.clone(),
            line: n.line,
            is_statement: ast.is_statement(n.id),
        })
        .collect();
    nodes.push(CpgNode {
        id: entry,
        kind: NodeKind::Function,
        code: "ENTRY".to_string(),
        line: 0,
        is_statement: false,
    });
    nodes.push(CpgNode {
        id: exit,
        kind: NodeKind::Function,
        code: "EXIT".to_string(),
        line: 0,
        is_statement: false,
    });

    let mut edges: Vec<CpgEdge> = Vec::new();
    for node in &ast.nodes {
        for &child in &node.children {
            edges.push(CpgEdge {
                src: node.id,
                dst: child,
                kind: EdgeKind::Ast,
                var: None,
            });
        }
    }

    let cfg_edges = build_cfg(ast, entry, exit);
    let mut view_nodes: Vec<NodeId> = ast.statement_ids();
    view_nodes.push(entry);
    view_nodes.push(exit);
    view_nodes.sort_unstable();
    let view = CfgView {
        nodes: view_nodes,
        edges: cfg_edges.iter().map(|e| (e.src, e.dst)).collect(),
        entry,
        exit,
    };

    // Dependence analyses run over the augmented view (entry -> exit edge)
    // so every branch-free statement depends on nothing but flow.
    let mut augmented = view.clone();
    if !augmented.edges.contains(&(entry, exit)) {
        augmented.edges.push((entry, exit));
    }
    let ipdom = post_dominators(&augmented)?;
    let conditions: BTreeSet<NodeId> = ast
        .nodes
        .iter()
        .filter(|n| n.kind == NodeKind::Condition)
        .map(|n| n.id)
        .collect();
    let cdg_edges = build_cdg(&augmented, &ipdom, &conditions);

    let mut def_uses: BTreeMap<NodeId, DefUse> = BTreeMap::new();
    for id in ast.statement_ids() {
        def_uses.insert(id, def_use(ast, id));
    }
    let reach_in = reaching_definitions(&view, &def_uses);
    let ddg_edges = dataflow::build_ddg(&reach_in, &def_uses);

    edges.extend(cfg_edges);
    edges.extend(cdg_edges);
    edges.extend(ddg_edges);
    edges.sort();
    edges.dedup();

    Ok(CodePropertyGraph {
        function_name: ast.function_name.clone(),
        nodes,
        edges,
        entry,
        exit,
    })
}

/// Control flow view (entry, exit, statements, CFG edges) of a built CPG.
pub fn cfg_view(cpg: &CodePropertyGraph) -> CfgView {
    let mut nodes = cpg.statement_ids();
    nodes.push(cpg.entry);
    nodes.push(cpg.exit);
    nodes.sort_unstable();
    nodes.dedup();
    CfgView {
        nodes,
        edges: cpg
            .edges_of_kind(EdgeKind::Cfg)
            .map(|e| (e.src, e.dst))
            .collect(),
        entry: cpg.entry,
        exit: cpg.exit,
    }
}
