//! Uniform random walks over the undirected, kind-blind union of all CPG
//! edges. Each (node, walk) pair derives its own RNG from the master seed,
//! so walk generation is order-independent and reproducible.

use super::tokenize_node;
use crate::frontend::{CodePropertyGraph, NodeId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Generate `walks_per_node` token sequences of `walk_len` node visits for
/// every node. Isolated nodes repeat themselves.
pub fn generate_walks(
    cpg: &CodePropertyGraph,
    walks_per_node: usize,
    walk_len: usize,
    seed: u64,
) -> Vec<Vec<String>> {
    let ids = cpg.ordered_node_ids();
    let mut adjacency: BTreeMap<NodeId, Vec<NodeId>> =
        ids.iter().map(|&id| (id, Vec::new())).collect();
    for edge in &cpg.edges {
        if edge.src != edge.dst {
            adjacency.get_mut(&edge.src).unwrap().push(edge.dst);
            adjacency.get_mut(&edge.dst).unwrap().push(edge.src);
        }
    }
    for neighbors in adjacency.values_mut() {
        neighbors.sort_unstable();
        neighbors.dedup();
    }
    let tokens: BTreeMap<NodeId, Vec<String>> = ids
        .iter()
        .map(|&id| (id, tokenize_node(cpg.node(id).unwrap())))
        .collect();

    let mut out = Vec::with_capacity(ids.len() * walks_per_node);
    for (node_idx, &start) in ids.iter().enumerate() {
        for walk_idx in 0..walks_per_node {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(
                seed,
                node_idx as u64,
                walk_idx as u64,
            ));
            let mut sequence = Vec::new();
            let mut current = start;
            for step in 0..walk_len {
                sequence.extend(tokens[&current].iter().cloned());
                if step + 1 == walk_len {
                    break;
                }
                let neighbors = &adjacency[&current];
                if !neighbors.is_empty() {
                    current = neighbors[rng.gen_range(0..neighbors.len())];
                }
            }
            out.push(sequence);
        }
    }
    out
}

/// splitmix64-style mixing of (seed, node, walk) into one RNG seed.
fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E3779B97F4A7C15))
        .wrapping_add(b.wrapping_mul(0xBF58476D1CE4E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}
