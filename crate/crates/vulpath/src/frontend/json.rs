//! CPG JSON interchange. One object per function:
//! `{"function": str, "entry": int, "exit": int, "nodes": [...], "edges": [...]}`.
//! Import validates shape and referential integrity and reports the JSON
//! path of the first violation, so documents produced by external graph
//! exporters fail with an actionable location.

use super::{CodePropertyGraph, CpgEdge, CpgNode, EdgeKind, FrontendError, NodeId, NodeKind};
use serde_json::{json, Map, Value};
use std::collections::BTreeSet;

/// Serialize a CPG to its JSON document.
pub fn cpg_to_json(cpg: &CodePropertyGraph) -> Value {
    let nodes: Vec<Value> = cpg
        .nodes
        .iter()
        .map(|n| {
            json!({
                "id": n.id,
                "kind": n.kind.name(),
                "code": n.code,
                "line": n.line,
                "is_statement": n.is_statement,
            })
        })
        .collect();
    let edges: Vec<Value> = cpg
        .edges
        .iter()
        .map(|e| {
            let mut obj = Map::new();
            obj.insert("src".into(), json!(e.src));
            obj.insert("dst".into(), json!(e.dst));
            obj.insert("kind".into(), json!(edge_kind_name(e.kind)));
            if let Some(var) = &e.var {
                obj.insert("var".into(), json!(var));
            }
            Value::Object(obj)
        })
        .collect();
    json!({
        "function": cpg.function_name,
        "entry": cpg.entry,
        "exit": cpg.exit,
        "nodes": nodes,
        "edges": edges,
    })
}

fn edge_kind_name(kind: EdgeKind) -> &'static str {
    match kind {
        EdgeKind::Ast => "AST",
        EdgeKind::Cfg => "CFG",
        EdgeKind::Cdg => "CDG",
        EdgeKind::Ddg => "DDG",
    }
}

fn schema_err(path: &str, message: &str) -> FrontendError {
    FrontendError::Schema {
        path: path.to_string(),
        message: message.to_string(),
    }
}

fn require<'v>(obj: &'v Map<String, Value>, key: &str, path: &str) -> Result<&'v Value, FrontendError> {
    obj.get(key)
        .ok_or_else(|| schema_err(&format!("{path}.{key}"), "missing key"))
}

fn as_u32(value: &Value, path: &str) -> Result<u32, FrontendError> {
    value
        .as_u64()
        .and_then(|v| u32::try_from(v).ok())
        .ok_or_else(|| schema_err(path, "expected a non-negative integer"))
}

fn as_str<'v>(value: &'v Value, path: &str) -> Result<&'v str, FrontendError> {
    value
        .as_str()
        .ok_or_else(|| schema_err(path, "expected a string"))
}

/// Parse and validate a CPG JSON document.
pub fn cpg_from_json(doc: &Value) -> Result<CodePropertyGraph, FrontendError> {
    let obj = doc
        .as_object()
        .ok_or_else(|| schema_err("$", "expected an object"))?;
    let function = as_str(require(obj, "function", "$")?, "$.function")?.to_string();
    let entry = as_u32(require(obj, "entry", "$")?, "$.entry")?;
    let exit = as_u32(require(obj, "exit", "$")?, "$.exit")?;

    let nodes_val = require(obj, "nodes", "$")?
        .as_array()
        .ok_or_else(|| schema_err("$.nodes", "expected an array"))?;
    let mut nodes = Vec::with_capacity(nodes_val.len());
    let mut ids: BTreeSet<NodeId> = BTreeSet::new();
    for (i, nv) in nodes_val.iter().enumerate() {
        let path = format!("$.nodes[{i}]");
        let nobj = nv
            .as_object()
            .ok_or_else(|| schema_err(&path, "expected an object"))?;
        let id = as_u32(require(nobj, "id", &path)?, &format!("{path}.id"))?;
        if !ids.insert(id) {
            return Err(schema_err(&format!("{path}.id"), "duplicate node id"));
        }
        let kind_name = as_str(require(nobj, "kind", &path)?, &format!("{path}.kind"))?;
        let kind = NodeKind::from_name(kind_name)
            .ok_or_else(|| schema_err(&format!("{path}.kind"), "unknown node kind"))?;
        let code = as_str(require(nobj, "code", &path)?, &format!("{path}.code"))?.to_string();
        let line = as_u32(require(nobj, "line", &path)?, &format!("{path}.line"))?;
        let is_statement = require(nobj, "is_statement", &path)?
            .as_bool()
            .ok_or_else(|| schema_err(&format!("{path}.is_statement"), "expected a boolean"))?;
        nodes.push(CpgNode {
            id,
            kind,
            code,
            line,
            is_statement,
        });
    }

    for (field, id) in [("entry", entry), ("exit", exit)] {
        if !ids.contains(&id) {
            return Err(schema_err(&format!("$.{field}"), "references an unknown node"));
        }
    }

    let edges_val = require(obj, "edges", "$")?
        .as_array()
        .ok_or_else(|| schema_err("$.edges", "expected an array"))?;
    let mut edges = Vec::with_capacity(edges_val.len());
    for (i, ev) in edges_val.iter().enumerate() {
        let path = format!("$.edges[{i}]");
        let eobj = ev
            .as_object()
            .ok_or_else(|| schema_err(&path, "expected an object"))?;
        let src = as_u32(require(eobj, "src", &path)?, &format!("{path}.src"))?;
        let dst = as_u32(require(eobj, "dst", &path)?, &format!("{path}.dst"))?;
        for (field, id) in [("src", src), ("dst", dst)] {
            if !ids.contains(&id) {
                return Err(schema_err(
                    &format!("{path}.{field}"),
                    "references an unknown node",
                ));
            }
        }
        let kind_name = as_str(require(eobj, "kind", &path)?, &format!("{path}.kind"))?;
        let kind = match kind_name {
            "AST" => EdgeKind::Ast,
            "CFG" => EdgeKind::Cfg,
            "CDG" => EdgeKind::Cdg,
            "DDG" => EdgeKind::Ddg,
            _ => return Err(schema_err(&format!("{path}.kind"), "unknown edge kind")),
        };
        let var = match eobj.get("var") {
            Some(Value::Null) | None => None,
            Some(v) => Some(as_str(v, &format!("{path}.var"))?.to_string()),
        };
        if kind == EdgeKind::Ddg && var.as_deref().unwrap_or("").is_empty() {
            return Err(schema_err(
                &format!("{path}.var"),
                "DDG edges require a nonempty var",
            ));
        }
        edges.push(CpgEdge {
            src,
            dst,
            kind,
            var,
        });
    }

    Ok(CodePropertyGraph {
        function_name: function,
        nodes,
        edges,
        entry,
        exit,
    })
}
