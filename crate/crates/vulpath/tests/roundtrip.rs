//! JSON interchange properties: arbitrary valid CPGs survive export/import
//! structurally intact.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vulpath::frontend::{
    cpg_from_json, cpg_to_json, CodePropertyGraph, CpgEdge, CpgNode, EdgeKind, NodeKind,
};

const KINDS: [NodeKind; 6] = [
    NodeKind::Function,
    NodeKind::Decl,
    NodeKind::Assign,
    NodeKind::Call,
    NodeKind::Identifier,
    NodeKind::Condition,
];

fn random_cpg(seed: u64) -> CodePropertyGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..20u32);
    let nodes: Vec<CpgNode> = (0..n)
        .map(|id| CpgNode {
            id,
            kind: KINDS[rng.gen_range(0..KINDS.len())],
            code: format!("code_{}", rng.gen_range(0..50)),
            line: rng.gen_range(0..30),
            is_statement: rng.gen_bool(0.4),
        })
        .collect();
    let mut edges = Vec::new();
    for _ in 0..rng.gen_range(0..40) {
        let kind = match rng.gen_range(0..4) {
            0 => EdgeKind::Ast,
            1 => EdgeKind::Cfg,
            2 => EdgeKind::Cdg,
            _ => EdgeKind::Ddg,
        };
        edges.push(CpgEdge {
            src: rng.gen_range(0..n),
            dst: rng.gen_range(0..n),
            kind,
            var: (kind == EdgeKind::Ddg).then(|| format!("v{}", rng.gen_range(0..5))),
        });
    }
    edges.sort();
    edges.dedup();
    CodePropertyGraph {
        function_name: format!("f{seed}"),
        nodes,
        edges,
        entry: 0,
        exit: n - 1,
    }
}

#[test]
fn hundred_random_graphs_round_trip() {
    for seed in 0..100 {
        let cpg = random_cpg(seed);
        let back = cpg_from_json(&cpg_to_json(&cpg)).unwrap();
        assert_eq!(cpg, back, "seed {seed}");
    }
}

proptest! {
    #[test]
    fn round_trip_is_identity_for_arbitrary_seeds(seed in 0u64..1_000_000) {
        let cpg = random_cpg(seed);
        let back = cpg_from_json(&cpg_to_json(&cpg)).unwrap();
        prop_assert_eq!(cpg, back);
    }

    #[test]
    fn parse_never_panics_on_arbitrary_text(text in "\\PC*") {
        let _ = vulpath::frontend::parse_function(&text);
    }
}
