//! Brute-force oracles shared by the oracle suites and the acceptance
//! gate. Everything here is written from scratch against the definitions
//! (simple-path enumeration, nested-loop matrices) and stays independent
//! of the library's implementation paths.
#![allow(dead_code)] // each test binary uses a different subset

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};
use vulpath::frontend::{CfgView, CodePropertyGraph, CpgEdge, CpgNode, EdgeKind, NodeKind};
use vulpath::nn::{NormAdj, PreparedGraph, SinkModel};

pub type Mat = Vec<Vec<f64>>;

/// Random CFG where every node reaches the exit: a forward chain plus
/// random extra edges (including back edges).
pub fn random_cfg(rng: &mut ChaCha8Rng) -> CfgView {
    let n = rng.gen_range(2..=12u32);
    let mut edges: BTreeSet<(u32, u32)> = BTreeSet::new();
    for i in 0..n - 1 {
        let j = rng.gen_range(i + 1..n);
        edges.insert((i, j));
    }
    let extra = rng.gen_range(0..=n);
    for _ in 0..extra {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b && b != 0 && a != n - 1 {
            edges.insert((a, b));
        }
    }
    CfgView {
        nodes: (0..n).collect(),
        edges: edges.into_iter().collect(),
        entry: 0,
        exit: n - 1,
    }
}

fn simple_paths(
    succs: &BTreeMap<u32, Vec<u32>>,
    from: u32,
    to: u32,
    path: &mut Vec<u32>,
    out: &mut Vec<Vec<u32>>,
) {
    if from == to {
        out.push(path.clone());
        return;
    }
    if let Some(next) = succs.get(&from) {
        for &s in next {
            if path.contains(&s) {
                continue;
            }
            path.push(s);
            simple_paths(succs, s, to, path, out);
            path.pop();
        }
    }
}

/// Brute-force post-dominance: b post-dominates a iff every simple path
/// from a to the exit contains b.
pub fn brute_force_postdom_sets(view: &CfgView) -> BTreeMap<u32, BTreeSet<u32>> {
    let mut succs: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for &(a, b) in &view.edges {
        succs.entry(a).or_default().push(b);
    }
    let mut sets = BTreeMap::new();
    for &a in &view.nodes {
        let mut paths = Vec::new();
        let mut path = vec![a];
        simple_paths(&succs, a, view.exit, &mut path, &mut paths);
        let mut common: Option<BTreeSet<u32>> = None;
        for p in &paths {
            let set: BTreeSet<u32> = p.iter().copied().collect();
            common = Some(match common {
                None => set,
                Some(acc) => acc.intersection(&set).copied().collect(),
            });
        }
        sets.insert(a, common.unwrap_or_default());
    }
    sets
}

/// Expand an ipdom map back into full post-dominator sets.
pub fn sets_from_ipdom(
    view: &CfgView,
    ipdom: &BTreeMap<u32, u32>,
) -> BTreeMap<u32, BTreeSet<u32>> {
    let mut sets = BTreeMap::new();
    for &a in &view.nodes {
        let mut set: BTreeSet<u32> = BTreeSet::new();
        let mut current = a;
        set.insert(current);
        while let Some(&next) = ipdom.get(&current) {
            set.insert(next);
            current = next;
        }
        sets.insert(a, set);
    }
    sets
}

/// Random acyclic dependence graph expressed as a CPG of statements.
pub fn random_dependence_cpg(rng: &mut ChaCha8Rng) -> CodePropertyGraph {
    let n = rng.gen_range(2..=12u32);
    let nodes: Vec<CpgNode> = (0..n)
        .map(|id| CpgNode {
            id,
            kind: NodeKind::Assign,
            code: format!("s{id}"),
            line: id + 1,
            is_statement: true,
        })
        .collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(0.3) {
                let kind = if rng.gen_bool(0.7) {
                    EdgeKind::Ddg
                } else {
                    EdgeKind::Cdg
                };
                edges.push(CpgEdge {
                    src: i,
                    dst: j,
                    kind,
                    var: match kind {
                        EdgeKind::Ddg => Some(format!("v{i}")),
                        _ => None,
                    },
                });
            }
        }
    }
    CodePropertyGraph {
        function_name: "dep".to_string(),
        nodes,
        edges,
        entry: 0,
        exit: n - 1,
    }
}

pub fn brute_force_slice(cpg: &CodePropertyGraph, sink: u32) -> BTreeSet<u32> {
    let dep_edges: Vec<(u32, u32)> = cpg
        .edges
        .iter()
        .filter(|e| matches!(e.kind, EdgeKind::Ddg | EdgeKind::Cdg))
        .map(|e| (e.src, e.dst))
        .collect();
    let mut slice: BTreeSet<u32> = std::iter::once(sink).collect();
    loop {
        let mut grew = false;
        for &(a, b) in &dep_edges {
            if slice.contains(&b) && slice.insert(a) {
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    slice
}

/// All simple root-to-sink dependence paths up to `max_depth` nodes.
pub fn brute_force_paths(
    cpg: &CodePropertyGraph,
    sink: u32,
    max_depth: usize,
) -> BTreeSet<Vec<u32>> {
    let mut has_incoming: BTreeSet<u32> = BTreeSet::new();
    let mut succs: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for e in &cpg.edges {
        if matches!(e.kind, EdgeKind::Ddg | EdgeKind::Cdg) {
            has_incoming.insert(e.dst);
            succs.entry(e.src).or_default().push(e.dst);
        }
    }
    let roots: Vec<u32> = cpg
        .nodes
        .iter()
        .map(|n| n.id)
        .filter(|id| !has_incoming.contains(id))
        .collect();
    let mut out = BTreeSet::new();
    for root in roots {
        let mut stack = vec![root];
        walk(&succs, sink, max_depth, &mut stack, &mut out);
    }
    out
}

fn walk(
    succs: &BTreeMap<u32, Vec<u32>>,
    sink: u32,
    max_depth: usize,
    stack: &mut Vec<u32>,
    out: &mut BTreeSet<Vec<u32>>,
) {
    if *stack.last().unwrap() == sink {
        if stack.len() <= max_depth {
            out.insert(stack.clone());
        }
        return;
    }
    if stack.len() >= max_depth {
        return;
    }
    if let Some(next) = succs.get(stack.last().unwrap()) {
        for &s in next {
            if stack.contains(&s) {
                continue;
            }
            stack.push(s);
            walk(succs, sink, max_depth, stack, out);
            stack.pop();
        }
    }
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for p in 0..k {
            let av = a[i][p];
            for j in 0..m {
                out[i][j] += av * b[p][j];
            }
        }
    }
    out
}

/// Dense normalized adjacency built independently from undirected pairs.
pub fn dense_norm_adj(n: usize, pairs: &BTreeSet<(u32, u32)>) -> Mat {
    let mut a = vec![vec![0.0; n]; n];
    for &(x, y) in pairs {
        a[x as usize][y as usize] = 1.0;
        a[y as usize][x as usize] = 1.0;
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let degrees: Vec<f64> = a.iter().map(|row| row.iter().sum()).collect();
    let mut s = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            s[i][j] = a[i][j] / (degrees[i] * degrees[j]).sqrt();
        }
    }
    s
}

pub fn to_mat(a: &Array2<f64>) -> Mat {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Naive eval-mode forward of the sink stack: conv, batch norm on running
/// stats, ReLU, residual where widths match, projected skip into logits.
pub fn naive_sink_forward(model: &SinkModel, s: &Mat, x: &Mat) -> Mat {
    let count = model.layers.len();
    let mut h = x.clone();
    for l in 0..count {
        let layer = &model.layers[l];
        let sh = matmul(s, &h);
        let mut pre = matmul(&sh, &to_mat(&layer.weight));
        let residual = l > 0 && l < count - 1 && model.dims[l] == model.dims[l + 1];
        if residual {
            for i in 0..pre.len() {
                for j in 0..pre[0].len() {
                    pre[i][j] += h[i][j];
                }
            }
        }
        if l == count - 1 {
            let skip = matmul(&h, &to_mat(&model.skip_proj));
            for i in 0..pre.len() {
                for j in 0..pre[0].len() {
                    pre[i][j] += skip[i][j];
                }
            }
            return pre;
        }
        let gamma = layer.gamma.row(0).to_vec();
        let beta = layer.beta.row(0).to_vec();
        let mean = layer.running_mean.row(0).to_vec();
        let var = layer.running_var.row(0).to_vec();
        for row in pre.iter_mut() {
            for j in 0..row.len() {
                let normed = (row[j] - mean[j]) / (var[j] + 1e-5).sqrt();
                let bn = gamma[j] * normed + beta[j];
                row[j] = if bn > 0.0 { bn } else { 0.0 };
            }
        }
        h = pre;
    }
    unreachable!()
}

pub fn random_pairs(rng: &mut ChaCha8Rng, n: u32) -> BTreeSet<(u32, u32)> {
    let mut pairs = BTreeSet::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(0.35) {
                pairs.insert((i, j));
            }
        }
    }
    pairs
}

/// Random graph ready for either model, with arbitrary labels.
pub fn random_prepared(rng: &mut ChaCha8Rng, dims_in: usize, nodes: u32) -> PreparedGraph {
    let pairs = random_pairs(rng, nodes);
    let adj = NormAdj::from_pairs(nodes as usize, &pairs);
    let features = Array2::from_shape_fn((nodes as usize, dims_in), |_| rng.gen_range(-1.0..1.0));
    let statement_rows: Vec<usize> = (0..nodes as usize).step_by(2).collect();
    let statement_labels: Vec<bool> = statement_rows.iter().map(|&r| r % 4 == 0).collect();
    PreparedGraph {
        id: "g".into(),
        adj,
        features,
        statement_rows,
        statement_labels,
        vulnerable: true,
    }
}

/// Max |a - b| over two dense outputs.
pub fn max_abs_diff(fast: &Array2<f64>, naive: &Mat) -> f64 {
    let mut max_diff: f64 = 0.0;
    for i in 0..fast.nrows() {
        for j in 0..fast.ncols() {
            max_diff = max_diff.max((fast[[i, j]] - naive[i][j]).abs());
        }
    }
    max_diff
}
