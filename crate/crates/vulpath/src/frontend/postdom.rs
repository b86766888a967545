//! Immediate post-dominators via iterative set intersection on the reversed
//! control flow graph. Graphs here are statement-level and small, so the
//! quadratic set formulation is plenty fast and easy to cross-check against
//! a brute-force path oracle.

use super::{CfgView, FrontendError, NodeId};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Compute the immediate post-dominator of every node except the exit.
///
/// `b` post-dominates `a` when every path from `a` to the exit passes
/// through `b`. Errors with the offending nodes when some node cannot
/// reach the exit.
pub fn post_dominators(view: &CfgView) -> Result<BTreeMap<NodeId, NodeId>, FrontendError> {
    let nodes: Vec<NodeId> = view.nodes.clone();
    let reaches_exit = reverse_reachable(view);
    let unreachable: Vec<NodeId> = nodes
        .iter()
        .copied()
        .filter(|n| !reaches_exit.contains(n))
        .collect();
    if !unreachable.is_empty() {
        return Err(FrontendError::UnreachableExit(unreachable));
    }

    let all: BTreeSet<NodeId> = nodes.iter().copied().collect();
    let mut pdom: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
    for &n in &nodes {
        if n == view.exit {
            pdom.insert(n, std::iter::once(n).collect());
        } else {
            pdom.insert(n, all.clone());
        }
    }

    let mut changed = true;
    while changed {
        changed = false;
        for &n in &nodes {
            if n == view.exit {
                continue;
            }
            let succs = view.successors(n);
            let mut new_set: Option<BTreeSet<NodeId>> = None;
            for s in succs {
                let succ_set = &pdom[&s];
                new_set = Some(match new_set {
                    None => succ_set.clone(),
                    Some(acc) => acc.intersection(succ_set).copied().collect(),
                });
            }
            let mut new_set = new_set.unwrap_or_default();
            new_set.insert(n);
            if new_set != pdom[&n] {
                pdom.insert(n, new_set);
                changed = true;
            }
        }
    }

    // ipdom(n) is the strict post-dominator whose own set covers all of
    // n's strict post-dominators, i.e. the one with the largest set.
    let mut ipdom = BTreeMap::new();
    for &n in &nodes {
        if n == view.exit {
            continue;
        }
        let strict: BTreeSet<NodeId> = pdom[&n].iter().copied().filter(|&d| d != n).collect();
        let best = strict
            .iter()
            .copied()
            .max_by_key(|d| (pdom[d].len(), std::cmp::Reverse(*d)));
        if let Some(best) = best {
            ipdom.insert(n, best);
        }
    }
    Ok(ipdom)
}

fn reverse_reachable(view: &CfgView) -> BTreeSet<NodeId> {
    let mut seen: BTreeSet<NodeId> = BTreeSet::new();
    let mut queue = VecDeque::new();
    seen.insert(view.exit);
    queue.push_back(view.exit);
    while let Some(n) = queue.pop_front() {
        for p in view.predecessors(n) {
            if seen.insert(p) {
                queue.push_back(p);
            }
        }
    }
    seen
}

#[cfg(test)]
mod tests {
    use super::*;

    fn view(nodes: &[NodeId], edges: &[(NodeId, NodeId)], entry: NodeId, exit: NodeId) -> CfgView {
        CfgView {
            nodes: nodes.to_vec(),
            edges: edges.to_vec(),
            entry,
            exit,
        }
    }

    #[test]
    fn chain_ipdoms_step_forward() {
        // a=0 b=1 c=2 exit=3
        let v = view(&[0, 1, 2, 3], &[(0, 1), (1, 2), (2, 3)], 0, 3);
        let ipdom = post_dominators(&v).unwrap();
        assert_eq!(ipdom[&0], 1);
        assert_eq!(ipdom[&1], 2);
        assert_eq!(ipdom[&2], 3);
    }

    #[test]
    fn diamond_join_post_dominates_the_branch() {
        // a=0 branches to b=1, c=2, joining at d=3, exit=4
        let v = view(
            &[0, 1, 2, 3, 4],
            &[(0, 1), (0, 2), (1, 3), (2, 3), (3, 4)],
            0,
            4,
        );
        let ipdom = post_dominators(&v).unwrap();
        assert_eq!(ipdom[&0], 3);
        assert_eq!(ipdom[&1], 3);
        assert_eq!(ipdom[&2], 3);
    }

    #[test]
    fn node_that_cannot_reach_exit_is_reported() {
        let v = view(&[0, 1, 2], &[(0, 2), (1, 1)], 0, 2);
        match post_dominators(&v) {
            Err(FrontendError::UnreachableExit(nodes)) => assert_eq!(nodes, vec![1]),
            other => panic!("expected UnreachableExit, got {other:?}"),
        }
    }
}
