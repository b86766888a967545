//! Graph-level detector: three 128-wide graph convolutions (batch norm +
//! ReLU), mean pooling over statement nodes, and a logistic readout. Also
//! provides an eval-mode backward pass with respect to the adjacency
//! entries, which the edge-mask explainer optimizes against.

use super::layers::{
    batchnorm_backward, batchnorm_eval, batchnorm_eval_backward, batchnorm_train, relu,
    update_running_stats, BnCache, GcnLayerParams,
};
use super::loss::weighted_bce_with_logit;
use super::{AdamState, BatchedGraphs, NnError, NormAdj, PreparedGraph, BN_MOMENTUM};
use crate::frontend::CodePropertyGraph;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct DetectorModel {
    pub layers: Vec<GcnLayerParams>,
    pub readout_w: Array2<f64>, // hidden x 1
    pub readout_b: Array2<f64>, // 1 x 1
    pub dims: Vec<usize>,
}

pub struct DetectorCache {
    hs: Vec<Array2<f64>>,
    shs: Vec<Array2<f64>>,
    bns: Vec<BnCache>,
    pub scores: Vec<f64>,
    pooled: Array2<f64>, // graphs x hidden
}

pub struct DetectorGrads(pub Vec<Array2<f64>>);

impl DetectorModel {
    /// `dims` runs input -> hidden per conv layer, e.g. [128, 128, 128, 128].
    pub fn init(dims: &[usize], seed: u64) -> DetectorModel {
        assert!(dims.len() >= 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = (0..dims.len() - 1)
            .map(|l| GcnLayerParams::init(dims[l], dims[l + 1], &mut rng))
            .collect();
        let hidden = dims[dims.len() - 1];
        let bound = (6.0 / (hidden + 1) as f64).sqrt();
        let mut readout_w = Array2::zeros((hidden, 1));
        for v in readout_w.iter_mut() {
            *v = rng.gen_range(-bound..bound);
        }
        DetectorModel {
            layers,
            readout_w,
            readout_b: Array2::zeros((1, 1)),
            dims: dims.to_vec(),
        }
    }

    pub fn default_dims(input: usize, hidden: usize, layer_count: usize) -> Vec<usize> {
        let mut dims = vec![input];
        dims.extend(std::iter::repeat(hidden).take(layer_count));
        dims
    }

    /// Node representations after the conv stack (eval mode).
    fn node_repr_eval(&self, adj: &NormAdj, x: &Array2<f64>) -> Array2<f64> {
        let mut h = x.clone();
        for layer in &self.layers {
            let pre = adj.apply(&h).dot(&layer.weight);
            h = relu(&batchnorm_eval(&pre, layer));
        }
        h
    }

    /// Mean-pool the given rows and apply the logistic readout.
    fn score_rows(&self, repr: &Array2<f64>, rows: &[usize]) -> f64 {
        let hidden = repr.ncols();
        let mut pooled = vec![0.0; hidden];
        for &r in rows {
            for (p, v) in pooled.iter_mut().zip(repr.row(r).iter()) {
                *p += v;
            }
        }
        let scale = 1.0 / rows.len().max(1) as f64;
        let mut score = self.readout_b[[0, 0]];
        for (p, w) in pooled.iter().zip(self.readout_w.column(0).iter()) {
            score += p * scale * w;
        }
        score
    }

    /// Vulnerability probability of one graph in eval mode.
    pub fn probability(
        &self,
        adj: &NormAdj,
        x: &Array2<f64>,
        statement_rows: &[usize],
    ) -> Result<f64, NnError> {
        if statement_rows.is_empty() {
            return Err(NnError::EmptyGraph);
        }
        let repr = self.node_repr_eval(adj, x);
        Ok(sigmoid(self.score_rows(&repr, statement_rows)))
    }

    /// Train-mode forward over a batch; one score per graph.
    pub fn forward_train(&self, batch: &BatchedGraphs) -> DetectorCache {
        let count = self.layers.len();
        let mut hs = Vec::with_capacity(count);
        let mut shs = Vec::with_capacity(count);
        let mut bns = Vec::with_capacity(count);
        let mut h = batch.features.clone();
        for layer in &self.layers {
            let sh = batch.adj.apply(&h);
            let pre = sh.dot(&layer.weight);
            let (a, bn) = batchnorm_train(&pre, layer);
            hs.push(h);
            shs.push(sh);
            bns.push(bn);
            h = relu(&a);
        }
        let hidden = h.ncols();
        let mut pooled = Array2::zeros((batch.statement_rows.len(), hidden));
        for (gi, rows) in batch.statement_rows.iter().enumerate() {
            let scale = 1.0 / rows.len().max(1) as f64;
            for &r in rows {
                let mut dst = pooled.row_mut(gi);
                dst.scaled_add(scale, &h.row(r));
            }
        }
        hs.push(h);
        let scores = pooled
            .rows()
            .into_iter()
            .map(|row| {
                let mut s = self.readout_b[[0, 0]];
                for (p, w) in row.iter().zip(self.readout_w.column(0).iter()) {
                    s += p * w;
                }
                s
            })
            .collect();
        DetectorCache {
            hs,
            shs,
            bns,
            scores,
            pooled,
        }
    }

    /// Backward from d loss / d score per graph.
    pub fn backward(
        &self,
        batch: &BatchedGraphs,
        cache: &DetectorCache,
        dscores: &[f64],
    ) -> DetectorGrads {
        let count = self.layers.len();
        let hidden = self.readout_w.nrows();
        let _ = dscores.len();

        let mut dreadout_w = Array2::zeros((hidden, 1));
        let mut dreadout_b = Array2::zeros((1, 1));
        for (gi, &ds) in dscores.iter().enumerate() {
            dreadout_b[[0, 0]] += ds;
            for (k, p) in cache.pooled.row(gi).iter().enumerate() {
                dreadout_w[[k, 0]] += ds * p;
            }
        }
        // distribute through the mean pool
        let n = cache.hs[count].nrows();
        let mut dh = Array2::zeros((n, hidden));
        for (gi, rows) in batch.statement_rows.iter().enumerate() {
            let scale = dscores[gi] / rows.len().max(1) as f64;
            for &r in rows {
                let mut dst = dh.row_mut(r);
                dst.scaled_add(scale, &self.readout_w.column(0));
            }
        }

        let mut dws = vec![Array2::zeros((0, 0)); count];
        let mut dgammas = vec![Array2::zeros((0, 0)); count];
        let mut dbetas = vec![Array2::zeros((0, 0)); count];
        for l in (0..count).rev() {
            let mut g = dh;
            let bn = &cache.bns[l];
            let bn_out = &bn.xhat * &self.layers[l].gamma.row(0).insert_axis(ndarray::Axis(0))
                + &self.layers[l].beta.row(0).insert_axis(ndarray::Axis(0));
            g.zip_mut_with(&bn_out, |gv, &av| {
                if av <= 0.0 {
                    *gv = 0.0;
                }
            });
            let (dpre, dgamma, dbeta) = batchnorm_backward(&g, bn, &self.layers[l]);
            dws[l] = cache.shs[l].t().dot(&dpre);
            dgammas[l] = dgamma;
            dbetas[l] = dbeta;
            dh = batch.adj.apply(&dpre.dot(&self.layers[l].weight.t()));
        }

        let mut out = Vec::with_capacity(count * 3 + 2);
        for l in 0..count {
            out.push(std::mem::take(&mut dws[l]));
            out.push(std::mem::take(&mut dgammas[l]));
            out.push(std::mem::take(&mut dbetas[l]));
        }
        out.push(dreadout_w);
        out.push(dreadout_b);
        DetectorGrads(out)
    }

    /// Eval-mode gradient of the pre-sigmoid score with respect to every
    /// adjacency entry, as a dense n x n matrix. Used by the edge-mask
    /// explainer; batch norm runs on running statistics so the transform
    /// per layer is affine.
    pub fn score_adjacency_gradient(
        &self,
        adj: &NormAdj,
        x: &Array2<f64>,
        statement_rows: &[usize],
    ) -> (f64, Array2<f64>) {
        let count = self.layers.len();
        let mut hs = Vec::with_capacity(count + 1);
        let mut pres = Vec::with_capacity(count);
        let mut h = x.clone();
        for layer in &self.layers {
            let pre = adj.apply(&h).dot(&layer.weight);
            pres.push(pre.clone());
            let a = batchnorm_eval(&pre, layer);
            hs.push(h);
            h = relu(&a);
        }
        hs.push(h.clone());
        let score = self.score_rows(&h, statement_rows);

        let n = adj.n;
        let hidden = self.readout_w.nrows();
        let mut dh = Array2::zeros((n, hidden));
        let scale = 1.0 / statement_rows.len().max(1) as f64;
        for &r in statement_rows {
            let mut dst = dh.row_mut(r);
            dst.scaled_add(scale, &self.readout_w.column(0));
        }
        let mut dadj = Array2::zeros((n, n));
        for l in (0..count).rev() {
            let mut g = dh;
            let layer = &self.layers[l];
            let a = batchnorm_eval(&pres[l], layer);
            g.zip_mut_with(&a, |gv, &av| {
                if av <= 0.0 {
                    *gv = 0.0;
                }
            });
            let dpre = batchnorm_eval_backward(&g, layer);
            // pre = S · (h W): d score / d S = dpre · (h W)^T
            let hw = hs[l].dot(&layer.weight);
            dadj += &dpre.dot(&hw.t());
            dh = adj.apply(&dpre.dot(&layer.weight.t()));
        }
        (score, dadj)
    }

    pub fn tensor_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for l in 0..self.layers.len() {
            names.push(format!("layer{l}.weight"));
            names.push(format!("layer{l}.gamma"));
            names.push(format!("layer{l}.beta"));
        }
        names.push("readout_w".to_string());
        names.push("readout_b".to_string());
        names
    }

    pub fn tensors(&self) -> Vec<&Array2<f64>> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.push(&layer.weight);
            out.push(&layer.gamma);
            out.push(&layer.beta);
        }
        out.push(&self.readout_w);
        out.push(&self.readout_b);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            out.push(&mut layer.weight);
            out.push(&mut layer.gamma);
            out.push(&mut layer.beta);
        }
        out.push(&mut self.readout_w);
        out.push(&mut self.readout_b);
        out
    }

    fn apply_bn_updates(&mut self, cache: &DetectorCache, warm: bool) {
        let momentum = if warm { 1.0 } else { BN_MOMENTUM };
        for (l, bn) in cache.bns.iter().enumerate() {
            update_running_stats(&mut self.layers[l], bn, momentum);
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Eval-mode vulnerability probability of a CPG.
pub fn detector_forward(
    cpg: &CodePropertyGraph,
    features: &Array2<f64>,
    model: &DetectorModel,
) -> Result<f64, NnError> {
    let ids = cpg.ordered_node_ids();
    if features.nrows() != ids.len() || features.ncols() != model.dims[0] {
        return Err(NnError::ShapeMismatch {
            context: "detector_forward features",
            expected: format!("{} x {}", ids.len(), model.dims[0]),
            actual: format!("{} x {}", features.nrows(), features.ncols()),
        });
    }
    let statement_rows: Vec<usize> = ids
        .iter()
        .enumerate()
        .filter(|(_, id)| cpg.node(**id).map(|n| n.is_statement).unwrap_or(false))
        .map(|(row, _)| row)
        .collect();
    let adj = NormAdj::from_cpg(cpg);
    model.probability(&adj, features, &statement_rows)
}

#[derive(Debug, Clone)]
pub struct DetectorTrainConfig {
    pub hidden: usize,
    pub layers: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub patience: Option<usize>,
}

impl Default for DetectorTrainConfig {
    fn default() -> Self {
        DetectorTrainConfig {
            hidden: 128,
            layers: 3,
            lr: 1e-3,
            epochs: 50,
            batch_size: 64,
            seed: 42,
            patience: Some(12),
        }
    }
}

fn graph_class_weights(graphs: &[PreparedGraph]) -> [f64; 2] {
    let pos = graphs.iter().filter(|g| g.vulnerable).count();
    let neg = graphs.len() - pos;
    let total = graphs.len() as f64;
    [
        total / (2.0 * neg.max(1) as f64),
        total / (2.0 * pos.max(1) as f64),
    ]
}

fn validation_accuracy(model: &DetectorModel, graphs: &[PreparedGraph]) -> f64 {
    if graphs.is_empty() {
        return 0.0;
    }
    let correct = graphs
        .iter()
        .filter(|g| {
            let p = model
                .probability(&g.adj, &g.features, &g.statement_rows)
                .unwrap_or(0.5);
            (p > 0.5) == g.vulnerable
        })
        .count();
    correct as f64 / graphs.len() as f64
}

fn mix(seed: u64, a: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0xD1B54A32D192ED03);
    z = (z ^ (z >> 29)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 32)
}

/// Train the graph-level detector; best-on-validation-accuracy selection.
pub fn train_detector(
    train: &[PreparedGraph],
    validation: &[PreparedGraph],
    config: &DetectorTrainConfig,
) -> Result<DetectorModel, NnError> {
    let pos = train.iter().filter(|g| g.vulnerable).count();
    if pos == 0 || pos == train.len() {
        return Err(NnError::SingleClass);
    }
    let class_weights = graph_class_weights(train);
    let input_dim = train[0].features.ncols();
    let dims = DetectorModel::default_dims(input_dim, config.hidden, config.layers);
    let mut model = DetectorModel::init(&dims, config.seed);
    let shapes: Vec<(usize, usize)> = model
        .tensors()
        .iter()
        .map(|t| (t.nrows(), t.ncols()))
        .collect();
    let mut adam = AdamState::new(config.lr, &shapes);

    let mut best: Option<(f64, DetectorModel)> = None;
    let mut stale = 0usize;
    let mut warm = true;
    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(mix(config.seed, epoch as u64));
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let graphs: Vec<&PreparedGraph> = chunk.iter().map(|&i| &train[i]).collect();
            let batch = BatchedGraphs::build(&graphs);
            let cache = model.forward_train(&batch);
            let (_, dscores) =
                weighted_bce_with_logit(&cache.scores, &batch.graph_labels, &class_weights);
            let grads = model.backward(&batch, &cache, &dscores);
            model.apply_bn_updates(&cache, warm);
            warm = false;
            let mut params = model.tensors_mut();
            adam.step(&mut params, &grads.0);
        }
        let score = validation_accuracy(&model, validation);
        let improved = best.as_ref().map(|(b, _)| score > *b).unwrap_or(true);
        if improved {
            best = Some((score, model.clone()));
            stale = 0;
        } else {
            stale += 1;
            if let Some(patience) = config.patience {
                if stale >= patience {
                    break;
                }
            }
        }
    }
    Ok(best.map(|(_, m)| m).unwrap_or(model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::build_cpg;
    use crate::nn::batch::PreparedGraph;

    fn prepared(source: &str, vulnerable: bool) -> PreparedGraph {
        let cpg = build_cpg(source).unwrap();
        let adj = NormAdj::from_cpg(&cpg);
        let ids = cpg.ordered_node_ids();
        let features = Array2::from_shape_fn((ids.len(), 8), |(i, j)| {
            ((i * 3 + j * 5) % 11) as f64 / 11.0 - 0.3
        });
        let statement_rows: Vec<usize> = ids
            .iter()
            .enumerate()
            .filter(|(_, id)| cpg.node(**id).unwrap().is_statement)
            .map(|(row, _)| row)
            .collect();
        let statement_labels = vec![false; statement_rows.len()];
        PreparedGraph {
            id: "t".into(),
            adj,
            features,
            statement_rows,
            statement_labels,
            vulnerable,
        }
    }

    #[test]
    fn zero_readout_gives_half() {
        let mut model = DetectorModel::init(&[8, 8, 8], 4);
        model.readout_w.fill(0.0);
        model.readout_b.fill(0.0);
        let g = prepared("void f(){int x = 1;\nint y = x;}", true);
        let p = model
            .probability(&g.adj, &g.features, &g.statement_rows)
            .unwrap();
        assert!((p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn probability_is_strictly_inside_unit_interval() {
        let model = DetectorModel::init(&[8, 8, 8], 4);
        let g = prepared("void f(){int x = 1;\nint y = x;\nprintIntLine(y);}", true);
        let p = model
            .probability(&g.adj, &g.features, &g.statement_rows)
            .unwrap();
        assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn empty_statement_set_errors() {
        let model = DetectorModel::init(&[8, 8, 8], 4);
        let g = prepared("void f(){int x = 1;}", false);
        assert!(matches!(
            model.probability(&g.adj, &g.features, &[]),
            Err(NnError::EmptyGraph)
        ));
    }

    #[test]
    fn duplicated_graph_scores_like_single_copy() {
        // two disjoint copies in one adjacency: mean pooling is unchanged
        let model = DetectorModel::init(&[8, 8, 8], 4);
        let g = prepared("void f(){int x = 1;\nint y = x;}", true);
        let n = g.adj.n;
        let mut entries = g.adj.entries.clone();
        for &(r, c, w) in &g.adj.entries {
            entries.push((r + n as u32, c + n as u32, w));
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let doubled = NormAdj {
            n: 2 * n,
            entries,
        };
        let mut features = Array2::zeros((2 * n, 8));
        features
            .slice_mut(ndarray::s![0..n, ..])
            .assign(&g.features);
        features
            .slice_mut(ndarray::s![n..2 * n, ..])
            .assign(&g.features);
        let mut rows = g.statement_rows.clone();
        rows.extend(g.statement_rows.iter().map(|&r| r + n));
        let single = model
            .probability(&g.adj, &g.features, &g.statement_rows)
            .unwrap();
        let double = model.probability(&doubled, &features, &rows).unwrap();
        assert!((single - double).abs() < 1e-9);
    }

    #[test]
    fn node_permutation_leaves_probability_unchanged() {
        let model = DetectorModel::init(&[8, 8, 8], 4);
        let g = prepared("void f(){int x = 1;\nint y = x;\nprintIntLine(y);}", true);
        let n = g.adj.n;
        let perm: Vec<usize> = (0..n).rev().collect();
        let mut features = Array2::zeros((n, 8));
        for i in 0..n {
            features.row_mut(perm[i]).assign(&g.features.row(i));
        }
        let mut entries = Vec::new();
        for &(r, c, w) in &g.adj.entries {
            entries.push((perm[r as usize] as u32, perm[c as usize] as u32, w));
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let adj = NormAdj { n, entries };
        let rows: Vec<usize> = g.statement_rows.iter().map(|&r| perm[r]).collect();
        let p0 = model
            .probability(&g.adj, &g.features, &g.statement_rows)
            .unwrap();
        let p1 = model.probability(&adj, &features, &rows).unwrap();
        assert!((p0 - p1).abs() < 1e-6);
    }

    #[test]
    fn single_class_training_errors() {
        let g = prepared("void f(){int x = 1;}", false);
        let config = DetectorTrainConfig {
            hidden: 8,
            layers: 2,
            epochs: 1,
            ..Default::default()
        };
        assert!(matches!(
            train_detector(&[g.clone()], &[g], &config),
            Err(NnError::SingleClass)
        ));
    }

    #[test]
    fn training_is_deterministic() {
        let a = prepared("void f(){int x = 1;\nmemmove(p, q, 4);}", true);
        let b = prepared("void f(){int x = 1;\nprintIntLine(x);}", false);
        let config = DetectorTrainConfig {
            hidden: 8,
            layers: 2,
            epochs: 3,
            batch_size: 2,
            seed: 9,
            ..Default::default()
        };
        let m1 = train_detector(&[a.clone(), b.clone()], &[a.clone()], &config).unwrap();
        let m2 = train_detector(&[a.clone(), b], &[a], &config).unwrap();
        for (ta, tb) in m1.tensors().iter().zip(m2.tensors().iter()) {
            assert_eq!(ta, tb);
        }
    }
}
