//! Symmetrically normalized adjacency D^-1/2 (A + I) D^-1/2 where A is the
//! binary symmetrized union of all four edge kinds. Stored sparse as sorted
//! (row, col, weight) entries; propagation iterates them in a fixed order
//! so results are reproducible bit for bit.

use crate::frontend::{CodePropertyGraph, NodeId};
use ndarray::Array2;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone)]
pub struct NormAdj {
    pub n: usize,
    /// (row, col, weight), sorted by (row, col); symmetric.
    pub entries: Vec<(u32, u32, f64)>,
}

impl NormAdj {
    /// Build from undirected (deduplicated) edge pairs over `n` nodes
    /// indexed 0..n.
    pub fn from_pairs(n: usize, pairs: &BTreeSet<(u32, u32)>) -> NormAdj {
        let mut adjacent: BTreeSet<(u32, u32)> = BTreeSet::new();
        for &(a, b) in pairs {
            if a != b && (a as usize) < n && (b as usize) < n {
                adjacent.insert((a, b));
                adjacent.insert((b, a));
            }
        }
        for i in 0..n as u32 {
            adjacent.insert((i, i));
        }
        let mut degree = vec![0.0f64; n];
        for &(a, _) in &adjacent {
            degree[a as usize] += 1.0;
        }
        let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
        let entries = adjacent
            .into_iter()
            .map(|(a, b)| (a, b, inv_sqrt[a as usize] * inv_sqrt[b as usize]))
            .collect();
        NormAdj { n, entries }
    }

    /// Build from a CPG: rows follow ascending node-id order.
    pub fn from_cpg(cpg: &CodePropertyGraph) -> NormAdj {
        let ids = cpg.ordered_node_ids();
        let index: BTreeMap<NodeId, u32> = ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i as u32))
            .collect();
        let mut pairs = BTreeSet::new();
        for edge in &cpg.edges {
            let (Some(&a), Some(&b)) = (index.get(&edge.src), index.get(&edge.dst)) else {
                continue;
            };
            if a != b {
                pairs.insert((a.min(b), a.max(b)));
            }
        }
        NormAdj::from_pairs(ids.len(), &pairs)
    }

    /// S · H with the sparse entries.
    pub fn apply(&self, h: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.n, h.ncols()));
        for &(r, c, w) in &self.entries {
            let src = h.row(c as usize);
            let mut dst = out.row_mut(r as usize);
            dst.scaled_add(w, &src);
        }
        out
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n, self.n));
        for &(r, c, w) in &self.entries {
            out[[r as usize, c as usize]] = w;
        }
        out
    }
}

/// The spec-level operation: dense normalized adjacency of a CPG.
pub fn normalized_adjacency(cpg: &CodePropertyGraph) -> Array2<f64> {
    NormAdj::from_cpg(cpg).to_dense()
}
