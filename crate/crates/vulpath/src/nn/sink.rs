//! Node-level sink classifier: six graph convolutions with batch norm,
//! ReLU, and dropout after each hidden layer. Each hidden block's output
//! feeds the next block's pre-activation where widths match; the skip into
//! the final projection layer is a learned affine map added to the logits.

use super::layers::{
    batchnorm_backward, batchnorm_eval, batchnorm_train, dropout, relu, update_running_stats,
    BnCache, GcnLayerParams,
};
use super::loss::{softmax_rows, weighted_ce_with_logits};
use super::{AdamState, BatchedGraphs, NnError, NormAdj, PreparedGraph, BN_MOMENTUM};
use crate::frontend::CodePropertyGraph;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct SinkModel {
    pub layers: Vec<GcnLayerParams>,
    /// Affine skip from the last hidden width into the logits.
    pub skip_proj: Array2<f64>,
    pub dropout_p: f64,
    pub dims: Vec<usize>,
}

/// Forward-pass cache for backpropagation (train mode).
pub struct SinkCache {
    /// h_0 (input) through h_{L-1} (input to the final layer).
    hs: Vec<Array2<f64>>,
    /// S . h_l per layer.
    shs: Vec<Array2<f64>>,
    bns: Vec<BnCache>,
    masks: Vec<Option<Array2<f64>>>,
    pub logits: Array2<f64>,
}

/// Per-tensor gradients in [`SinkModel::tensors`] order.
pub struct SinkGrads(pub Vec<Array2<f64>>);

impl SinkModel {
    /// `dims` runs input -> hidden... -> classes, e.g. [128, 256x5, 2].
    pub fn init(dims: &[usize], dropout_p: f64, seed: u64) -> SinkModel {
        assert!(dims.len() >= 3, "at least one hidden layer");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = (0..dims.len() - 1)
            .map(|l| GcnLayerParams::init(dims[l], dims[l + 1], &mut rng))
            .collect();
        let bound = (6.0 / (dims[dims.len() - 2] + dims[dims.len() - 1]) as f64).sqrt();
        let mut skip_proj = Array2::zeros((dims[dims.len() - 2], dims[dims.len() - 1]));
        for v in skip_proj.iter_mut() {
            *v = rng.gen_range(-bound..bound);
        }
        SinkModel {
            layers,
            skip_proj,
            dropout_p,
            dims: dims.to_vec(),
        }
    }

    pub fn default_dims(input: usize, hidden: usize, layer_count: usize) -> Vec<usize> {
        let mut dims = vec![input];
        dims.extend(std::iter::repeat(hidden).take(layer_count - 1));
        dims.push(2);
        dims
    }

    fn layer_count(&self) -> usize {
        self.layers.len()
    }

    fn has_residual(&self, l: usize) -> bool {
        l > 0 && l < self.layer_count() - 1 && self.dims[l] == self.dims[l + 1]
    }

    /// Train-mode forward with caches; dropout masks derive from `seed`.
    pub fn forward_train(&self, adj: &NormAdj, x: &Array2<f64>, seed: u64) -> SinkCache {
        let count = self.layer_count();
        let mut hs = Vec::with_capacity(count);
        let mut shs = Vec::with_capacity(count);
        let mut bns = Vec::with_capacity(count - 1);
        let mut masks = Vec::with_capacity(count - 1);
        let mut h = x.clone();
        let mut logits = None;
        for l in 0..count {
            let sh = adj.apply(&h);
            let mut pre = sh.dot(&self.layers[l].weight);
            if self.has_residual(l) {
                pre += &h;
            }
            if l == count - 1 {
                pre += &h.dot(&self.skip_proj);
            }
            hs.push(h.clone());
            shs.push(sh);
            if l < count - 1 {
                let (a, bn) = batchnorm_train(&pre, &self.layers[l]);
                let r = relu(&a);
                let (out, mask) = dropout(&r, self.dropout_p, true, seed.wrapping_add(l as u64));
                bns.push(bn);
                masks.push(mask);
                h = out;
            } else {
                logits = Some(pre);
            }
        }
        SinkCache {
            hs,
            shs,
            bns,
            masks,
            logits: logits.expect("final layer produces logits"),
        }
    }

    /// Eval-mode logits (running batch-norm statistics, no dropout).
    pub fn forward_eval(&self, adj: &NormAdj, x: &Array2<f64>) -> Array2<f64> {
        let count = self.layer_count();
        let mut h = x.clone();
        for l in 0..count {
            let sh = adj.apply(&h);
            let mut pre = sh.dot(&self.layers[l].weight);
            if self.has_residual(l) {
                pre += &h;
            }
            if l == count - 1 {
                pre += &h.dot(&self.skip_proj);
                return pre;
            }
            let a = batchnorm_eval(&pre, &self.layers[l]);
            h = relu(&a);
        }
        unreachable!("loop returns at the final layer")
    }

    /// Backpropagate d loss / d logits; returns gradients in tensor order.
    pub fn backward(&self, adj: &NormAdj, cache: &SinkCache, dlogits: &Array2<f64>) -> SinkGrads {
        let count = self.layer_count();
        let mut dws: Vec<Array2<f64>> = vec![Array2::zeros((0, 0)); count];
        let mut dgammas: Vec<Array2<f64>> = vec![Array2::zeros((0, 0)); count];
        let mut dbetas: Vec<Array2<f64>> = vec![Array2::zeros((0, 0)); count];

        let last = count - 1;
        dws[last] = cache.shs[last].t().dot(dlogits);
        // unused batch-norm parameters of the output layer get zero grads
        dgammas[last] = Array2::zeros(self.layers[last].gamma.raw_dim());
        dbetas[last] = Array2::zeros(self.layers[last].beta.raw_dim());
        let dproj = cache.hs[last].t().dot(dlogits);
        let mut dh = adj.apply(&dlogits.dot(&self.layers[last].weight.t()))
            + dlogits.dot(&self.skip_proj.t());

        for l in (0..last).rev() {
            let mut g = dh;
            if let Some(mask) = &cache.masks[l] {
                g = &g * mask;
            }
            // recompute the pre-ReLU activation sign from the BN cache
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
            let mut dh_prev = adj.apply(&dpre.dot(&self.layers[l].weight.t()));
            if self.has_residual(l) {
                dh_prev += &dpre;
            }
            dh = dh_prev;
        }

        let mut out = Vec::with_capacity(count * 3 + 1);
        for l in 0..count {
            out.push(std::mem::take(&mut dws[l]));
            out.push(std::mem::take(&mut dgammas[l]));
            out.push(std::mem::take(&mut dbetas[l]));
        }
        out.push(dproj);
        SinkGrads(out)
    }

    /// Trainable tensors in a fixed order (weights, batch-norm scale and
    /// shift per layer, then the skip projection).
    pub fn tensor_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for l in 0..self.layer_count() {
            names.push(format!("layer{l}.weight"));
            names.push(format!("layer{l}.gamma"));
            names.push(format!("layer{l}.beta"));
        }
        names.push("skip_proj".to_string());
        names
    }

    pub fn tensors(&self) -> Vec<&Array2<f64>> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.push(&layer.weight);
            out.push(&layer.gamma);
            out.push(&layer.beta);
        }
        out.push(&self.skip_proj);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            out.push(&mut layer.weight);
            out.push(&mut layer.gamma);
            out.push(&mut layer.beta);
        }
        out.push(&mut self.skip_proj);
        out
    }

    /// The first update adopts the batch statistics outright so the
    /// running estimates start at the right scale; later updates use the
    /// standard momentum.
    fn apply_bn_updates(&mut self, cache: &SinkCache, warm: bool) {
        let momentum = if warm { 1.0 } else { BN_MOMENTUM };
        for (l, bn) in cache.bns.iter().enumerate() {
            update_running_stats(&mut self.layers[l], bn, momentum);
        }
    }
}

/// Per-node (non-sink, sink) probabilities for a CPG in eval mode.
pub fn sink_forward(
    cpg: &CodePropertyGraph,
    features: &Array2<f64>,
    model: &SinkModel,
) -> Result<Array2<f64>, NnError> {
    if features.nrows() != cpg.nodes.len() || features.ncols() != model.dims[0] {
        return Err(NnError::ShapeMismatch {
            context: "sink_forward features",
            expected: format!("{} x {}", cpg.nodes.len(), model.dims[0]),
            actual: format!("{} x {}", features.nrows(), features.ncols()),
        });
    }
    let adj = NormAdj::from_cpg(cpg);
    let logits = model.forward_eval(&adj, features);
    Ok(softmax_rows(&logits))
}

#[derive(Debug, Clone)]
pub struct SinkTrainConfig {
    pub hidden: usize,
    pub layers: usize,
    pub dropout: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Stop after this many epochs without validation improvement.
    pub patience: Option<usize>,
}

impl Default for SinkTrainConfig {
    fn default() -> Self {
        SinkTrainConfig {
            hidden: 256,
            layers: 6,
            dropout: 0.5,
            lr: 1e-3,
            epochs: 50,
            batch_size: 64,
            seed: 42,
            patience: Some(12),
        }
    }
}

/// Inverse-frequency class weights over statement labels.
fn node_class_weights(graphs: &[PreparedGraph]) -> [f64; 2] {
    let mut counts = [0usize; 2];
    for g in graphs {
        for &y in &g.statement_labels {
            counts[y as usize] += 1;
        }
    }
    let total = (counts[0] + counts[1]) as f64;
    [
        total / (2.0 * counts[0].max(1) as f64),
        total / (2.0 * counts[1].max(1) as f64),
    ]
}

/// Macro F1 of argmax predictions over all statement nodes.
fn validation_macro_f1(model: &SinkModel, graphs: &[PreparedGraph]) -> f64 {
    let mut tp = [0usize; 2];
    let mut fp = [0usize; 2];
    let mut fn_ = [0usize; 2];
    for g in graphs {
        let logits = model.forward_eval(&g.adj, &g.features);
        for (&row, &label) in g.statement_rows.iter().zip(&g.statement_labels) {
            let pred = (logits[[row, 1]] > logits[[row, 0]]) as usize;
            let truth = label as usize;
            if pred == truth {
                tp[truth] += 1;
            } else {
                fp[pred] += 1;
                fn_[truth] += 1;
            }
        }
    }
    let f1 = |c: usize| {
        let p = tp[c] as f64 / (tp[c] + fp[c]).max(1) as f64;
        let r = tp[c] as f64 / (tp[c] + fn_[c]).max(1) as f64;
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    };
    (f1(0) + f1(1)) / 2.0
}

fn mix(seed: u64, a: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z ^ (z >> 31)
}

/// Train the sink classifier with graph-level oversampling, weighted loss,
/// and best-on-validation selection. Deterministic under `config.seed`.
pub fn train_sink(
    train: &[PreparedGraph],
    validation: &[PreparedGraph],
    config: &SinkTrainConfig,
) -> Result<SinkModel, NnError> {
    let has_positive = train
        .iter()
        .any(|g| g.statement_labels.iter().any(|&y| y));
    if !has_positive {
        return Err(NnError::NoPositives);
    }
    let class_weights = node_class_weights(train);
    let input_dim = train[0].features.ncols();
    let dims = SinkModel::default_dims(input_dim, config.hidden, config.layers);
    let mut model = SinkModel::init(&dims, config.dropout, config.seed);
    let shapes: Vec<(usize, usize)> = model
        .tensors()
        .iter()
        .map(|t| (t.nrows(), t.ncols()))
        .collect();
    let mut adam = AdamState::new(config.lr, &shapes);

    let base_order = super::oversample_to_parity(train);
    let mut best: Option<(f64, SinkModel)> = None;
    let mut stale = 0usize;
    let mut warm = true;

    let trace = std::env::var("VULPATH_TRACE").is_ok();
    for epoch in 0..config.epochs {
        let mut order = base_order.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(mix(config.seed, epoch as u64));
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            let graphs: Vec<&PreparedGraph> = chunk.iter().map(|&i| &train[i]).collect();
            let batch = BatchedGraphs::build(&graphs);
            let seed = mix(config.seed, (epoch as u64) << 20 | batch_idx as u64);
            let cache = model.forward_train(&batch.adj, &batch.features, seed);

            let (rows, labels) = batch.flat_statements();
            let mut stmt_logits = Array2::zeros((rows.len(), 2));
            for (k, &r) in rows.iter().enumerate() {
                stmt_logits.row_mut(k).assign(&cache.logits.row(r));
            }
            let (loss, dstmt) = weighted_ce_with_logits(&stmt_logits, &labels, &class_weights);
            epoch_loss += loss;
            batches += 1;
            let mut dlogits = Array2::zeros(cache.logits.raw_dim());
            for (k, &r) in rows.iter().enumerate() {
                let mut row = dlogits.row_mut(r);
                row += &dstmt.row(k);
            }

            let grads = model.backward(&batch.adj, &cache, &dlogits);
            model.apply_bn_updates(&cache, warm);
            warm = false;
            let mut params = model.tensors_mut();
            adam.step(&mut params, &grads.0);
        }

        let score = validation_macro_f1(&model, validation);
        if trace {
            let train_f1 = validation_macro_f1(&model, &train[..train.len().min(60)]);
            eprintln!(
                "sink epoch {epoch}: train loss {:.5}, train macro-F1 {train_f1:.4}, val macro-F1 {score:.4}",
                epoch_loss / batches.max(1) as f64
            );
        }
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
