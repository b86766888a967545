//! Structural invariants of built code property graphs, checked across the
//! synthetic corpus: CFG degree discipline, reachability, statement line
//! uniqueness, DDG edge consistency against def/use and reaching
//! definitions, and equality of the assembled CPG with the composition of
//! the four sub-builders.

use std::collections::{BTreeMap, BTreeSet};
use vulpath::corpus::generate_synthetic;
use vulpath::frontend::{
    build_cfg, build_cdg, build_cpg, cfg_view, def_use, parse_function, post_dominators,
    reaching_definitions, CfgView, EdgeKind, NodeKind,
};

#[test]
fn cfg_degree_discipline_and_reachability_hold_on_corpus() {
    for entry in generate_synthetic(60, 21) {
        let cpg = build_cpg(&entry.source).unwrap();
        let statements = cpg.statement_ids();
        let mut out_degree: BTreeMap<u32, usize> = BTreeMap::new();
        for edge in cpg.edges_of_kind(EdgeKind::Cfg) {
            *out_degree.entry(edge.src).or_default() += 1;
        }
        for &id in &statements {
            let node = cpg.node(id).unwrap();
            let degree = out_degree.get(&id).copied().unwrap_or(0);
            if node.kind == NodeKind::Condition {
                assert_eq!(degree, 2, "{}: condition at line {}", entry.id, node.line);
            } else {
                assert_eq!(degree, 1, "{}: statement at line {}", entry.id, node.line);
            }
        }
        // every statement reachable from entry over CFG edges
        let mut seen: BTreeSet<u32> = std::iter::once(cpg.entry).collect();
        let mut stack = vec![cpg.entry];
        let succs: Vec<(u32, u32)> = cpg
            .edges_of_kind(EdgeKind::Cfg)
            .map(|e| (e.src, e.dst))
            .collect();
        while let Some(n) = stack.pop() {
            for &(a, b) in &succs {
                if a == n && seen.insert(b) {
                    stack.push(b);
                }
            }
        }
        for &id in &statements {
            assert!(seen.contains(&id), "{}: unreachable statement {id}", entry.id);
        }
        // exactly one statement node per executable line
        let mut lines = BTreeSet::new();
        for &id in &statements {
            let line = cpg.node(id).unwrap().line;
            assert!(lines.insert(line), "{}: duplicate statement line {line}", entry.id);
        }
    }
}

#[test]
fn ddg_edges_are_justified_by_def_use_and_reaching_definitions() {
    for entry in generate_synthetic(60, 22) {
        let ast = parse_function(&entry.source).unwrap();
        let cpg = build_cpg(&entry.source).unwrap();
        let view = cfg_view(&cpg);
        let mut def_uses = BTreeMap::new();
        for id in ast.statement_ids() {
            def_uses.insert(id, def_use(&ast, id));
        }
        let reach_in = reaching_definitions(&view, &def_uses);
        for edge in cpg.edges_of_kind(EdgeKind::Ddg) {
            let var = edge.var.as_deref().expect("DDG edges carry a var");
            assert!(!var.is_empty());
            let def = def_uses.get(&edge.src).expect("src is a statement");
            let usage = def_uses.get(&edge.dst).expect("dst is a statement");
            assert!(def.defs.contains(var), "{}: {var} not defined at src", entry.id);
            assert!(usage.uses.contains(var), "{}: {var} not used at dst", entry.id);
            let in_set = reach_in.get(&edge.dst).expect("dst has an IN set");
            assert!(
                in_set.contains(&(var.to_string(), edge.src)),
                "{}: def of {var} at {} does not reach {}",
                entry.id,
                edge.src,
                edge.dst
            );
        }
    }
}

#[test]
fn assembled_cpg_equals_composition_of_sub_builders() {
    for entry in generate_synthetic(40, 23) {
        let ast = parse_function(&entry.source).unwrap();
        let cpg = build_cpg(&entry.source).unwrap();

        // recompose the four edge sets through the public sub-builders
        let max_id = ast.nodes.iter().map(|n| n.id).max().unwrap();
        let (entry_id, exit_id) = (max_id + 1, max_id + 2);
        let mut edges = Vec::new();
        for node in &ast.nodes {
            for &child in &node.children {
                edges.push((node.id, child, EdgeKind::Ast, None));
            }
        }
        let cfg = build_cfg(&ast, entry_id, exit_id);
        let mut view_nodes = ast.statement_ids();
        view_nodes.push(entry_id);
        view_nodes.push(exit_id);
        view_nodes.sort_unstable();
        let view = CfgView {
            nodes: view_nodes,
            edges: cfg.iter().map(|e| (e.src, e.dst)).collect(),
            entry: entry_id,
            exit: exit_id,
        };
        let mut augmented = view.clone();
        augmented.edges.push((entry_id, exit_id));
        let ipdom = post_dominators(&augmented).unwrap();
        let conditions: BTreeSet<u32> = ast
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Condition)
            .map(|n| n.id)
            .collect();
        let cdg = build_cdg(&augmented, &ipdom, &conditions);
        let mut def_uses = BTreeMap::new();
        for id in ast.statement_ids() {
            def_uses.insert(id, def_use(&ast, id));
        }
        let reach_in = reaching_definitions(&view, &def_uses);
        let ddg = vulpath::frontend::build_ddg(&reach_in, &def_uses);

        for e in cfg {
            edges.push((e.src, e.dst, EdgeKind::Cfg, None));
        }
        for e in cdg {
            edges.push((e.src, e.dst, EdgeKind::Cdg, None));
        }
        for e in ddg {
            edges.push((e.src, e.dst, EdgeKind::Ddg, e.var));
        }
        let mut expected: Vec<(u32, u32, EdgeKind, Option<String>)> = edges;
        expected.sort();
        expected.dedup();
        let mut actual: Vec<(u32, u32, EdgeKind, Option<String>)> = cpg
            .edges
            .iter()
            .map(|e| (e.src, e.dst, e.kind, e.var.clone()))
            .collect();
        actual.sort();
        assert_eq!(actual, expected, "{}", entry.id);
    }
}
