//! Control dependence construction (Ferrante–Ottenstein–Warren): for each
//! CFG edge u -> v where v does not post-dominate u, every node on the
//! post-dominator tree path from v up to (excluding) ipdom(u) is control
//! dependent on u. Only branch conditions are kept as controllers; the
//! augmented entry edge makes straight-line code depend on nothing.

use super::{CfgView, CpgEdge, EdgeKind, NodeId};
use std::collections::{BTreeMap, BTreeSet};

/// Derive CDG edges from an (augmented) CFG view and its ipdom map.
/// `conditions` restricts emitted controllers to condition statements.
pub fn build_cdg(
    view: &CfgView,
    ipdom: &BTreeMap<NodeId, NodeId>,
    conditions: &BTreeSet<NodeId>,
) -> Vec<CpgEdge> {
    let mut deps: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();
    for &(u, v) in &view.edges {
        let stop = ipdom.get(&u).copied();
        let mut walk = Some(v);
        while let Some(w) = walk {
            if Some(w) == stop || w == view.exit {
                break;
            }
            if w != u {
                deps.insert((u, w));
            }
            walk = ipdom.get(&w).copied();
        }
    }
    deps.into_iter()
        .filter(|(u, _)| conditions.contains(u))
        .map(|(src, dst)| CpgEdge {
            src,
            dst,
            kind: EdgeKind::Cdg,
            var: None,
        })
        .collect()
}
