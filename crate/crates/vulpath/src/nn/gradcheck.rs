//! Central-finite-difference verification of the analytic gradients.
//! Every parameter tensor is probed at a deterministic sample of entries;
//! the training loss is evaluated with a fixed dropout seed so the loss is
//! a pure function of the parameters.

use super::batch::{BatchedGraphs, PreparedGraph};
use super::detector::DetectorModel;
use super::loss::{weighted_bce_with_logit, weighted_ce_with_logits};
use super::sink::SinkModel;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SAMPLES_PER_TENSOR: usize = 6;
const DROPOUT_SEED: u64 = 0x5EED;
const NODE_WEIGHTS: [f64; 2] = [1.0, 1.7];
const GRAPH_WEIGHTS: [f64; 2] = [0.9, 1.4];

pub enum GradCheckTarget<'a> {
    Sink(&'a SinkModel),
    Detector(&'a DetectorModel),
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// (tensor name, max relative error over sampled entries)
    pub per_tensor: Vec<(String, f64)>,
    pub max_rel_err: f64,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err <= self.tolerance
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-4)
}

fn sink_loss(model: &SinkModel, batch: &BatchedGraphs) -> f64 {
    let cache = model.forward_train(&batch.adj, &batch.features, DROPOUT_SEED);
    let (rows, labels) = batch.flat_statements();
    let mut stmt_logits = Array2::zeros((rows.len(), 2));
    for (k, &r) in rows.iter().enumerate() {
        stmt_logits.row_mut(k).assign(&cache.logits.row(r));
    }
    weighted_ce_with_logits(&stmt_logits, &labels, &NODE_WEIGHTS).0
}

fn sink_grads(model: &SinkModel, batch: &BatchedGraphs) -> Vec<Array2<f64>> {
    let cache = model.forward_train(&batch.adj, &batch.features, DROPOUT_SEED);
    let (rows, labels) = batch.flat_statements();
    let mut stmt_logits = Array2::zeros((rows.len(), 2));
    for (k, &r) in rows.iter().enumerate() {
        stmt_logits.row_mut(k).assign(&cache.logits.row(r));
    }
    let (_, dstmt) = weighted_ce_with_logits(&stmt_logits, &labels, &NODE_WEIGHTS);
    let mut dlogits = Array2::zeros(cache.logits.raw_dim());
    for (k, &r) in rows.iter().enumerate() {
        let mut row = dlogits.row_mut(r);
        row += &dstmt.row(k);
    }
    model.backward(&batch.adj, &cache, &dlogits).0
}

fn detector_loss(model: &DetectorModel, batch: &BatchedGraphs) -> f64 {
    let cache = model.forward_train(batch);
    weighted_bce_with_logit(&cache.scores, &batch.graph_labels, &GRAPH_WEIGHTS).0
}

fn detector_grads(model: &DetectorModel, batch: &BatchedGraphs) -> Vec<Array2<f64>> {
    let cache = model.forward_train(batch);
    let (_, dscores) = weighted_bce_with_logit(&cache.scores, &batch.graph_labels, &GRAPH_WEIGHTS);
    model.backward(batch, &cache, &dscores).0
}

/// Compare analytic gradients against central finite differences on one
/// graph. The report carries the max relative error per tensor.
pub fn finite_diff_check(
    target: GradCheckTarget<'_>,
    graph: &PreparedGraph,
    tolerance: f64,
) -> GradCheckReport {
    let batch = BatchedGraphs::build(&[graph]);
    let (names, analytic): (Vec<String>, Vec<Array2<f64>>) = match &target {
        GradCheckTarget::Sink(model) => (model.tensor_names(), sink_grads(model, &batch)),
        GradCheckTarget::Detector(model) => {
            (model.tensor_names(), detector_grads(model, &batch))
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    let mut per_tensor = Vec::with_capacity(names.len());
    let mut overall: f64 = 0.0;
    for (t_idx, name) in names.iter().enumerate() {
        let shape = (analytic[t_idx].nrows(), analytic[t_idx].ncols());
        let total = shape.0 * shape.1;
        let mut worst: f64 = 0.0;
        let samples: Vec<usize> = if total <= SAMPLES_PER_TENSOR {
            (0..total).collect()
        } else {
            (0..SAMPLES_PER_TENSOR)
                .map(|_| rng.gen_range(0..total))
                .collect()
        };
        for flat in samples {
            let (i, j) = (flat / shape.1, flat % shape.1);
            let fd = match &target {
                GradCheckTarget::Sink(model) => {
                    let mut probe = (*model).clone();
                    let theta = probe.tensors()[t_idx][[i, j]];
                    let h = 1e-5 * theta.abs().max(1.0);
                    probe.tensors_mut()[t_idx][[i, j]] = theta + h;
                    let plus = sink_loss(&probe, &batch);
                    probe.tensors_mut()[t_idx][[i, j]] = theta - h;
                    let minus = sink_loss(&probe, &batch);
                    (plus - minus) / (2.0 * h)
                }
                GradCheckTarget::Detector(model) => {
                    let mut probe = (*model).clone();
                    let theta = probe.tensors()[t_idx][[i, j]];
                    let h = 1e-5 * theta.abs().max(1.0);
                    probe.tensors_mut()[t_idx][[i, j]] = theta + h;
                    let plus = detector_loss(&probe, &batch);
                    probe.tensors_mut()[t_idx][[i, j]] = theta - h;
                    let minus = detector_loss(&probe, &batch);
                    (plus - minus) / (2.0 * h)
                }
            };
            let a = analytic[t_idx][[i, j]];
            worst = worst.max(rel_err(a, fd));
        }
        overall = overall.max(worst);
        per_tensor.push((name.clone(), worst));
    }

    GradCheckReport {
        per_tensor,
        max_rel_err: overall,
        tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::build_cpg;
    use crate::nn::NormAdj;

    fn prepared(source: &str, sink_line: Option<u32>) -> PreparedGraph {
        let cpg = build_cpg(source).unwrap();
        let adj = NormAdj::from_cpg(&cpg);
        let ids = cpg.ordered_node_ids();
        let features = Array2::from_shape_fn((ids.len(), 8), |(i, j)| {
            ((i * 7 + j * 3) % 13) as f64 / 13.0 - 0.5
        });
        let statement_rows: Vec<usize> = ids
            .iter()
            .enumerate()
            .filter(|(_, id)| cpg.node(**id).unwrap().is_statement)
            .map(|(row, _)| row)
            .collect();
        let statement_labels: Vec<bool> = statement_rows
            .iter()
            .map(|&row| sink_line == Some(cpg.node(ids[row]).unwrap().line))
            .collect();
        PreparedGraph {
            id: "t".into(),
            adj,
            features,
            statement_rows,
            statement_labels,
            vulnerable: sink_line.is_some(),
        }
    }

    #[test]
    fn sink_gradients_match_finite_differences() {
        let g = prepared(
            "void f(){int x = 1;\nint y = x;\nmemmove(p, q, 8);\nprintIntLine(y);}",
            Some(3),
        );
        let model = SinkModel::init(&[8, 12, 12, 2], 0.5, 77);
        let report = finite_diff_check(GradCheckTarget::Sink(&model), &g, 1e-4);
        assert!(report.passed(), "report: {:?}", report.per_tensor);
    }

    #[test]
    fn detector_gradients_match_finite_differences() {
        let g = prepared("void f(){int x = 1;\nint y = x;\nmemmove(p, q, 8);}", Some(3));
        let model = DetectorModel::init(&[8, 10, 10], 13);
        let report = finite_diff_check(GradCheckTarget::Detector(&model), &g, 1e-4);
        assert!(report.passed(), "report: {:?}", report.per_tensor);
    }

    #[test]
    fn zero_weight_models_check_cleanly() {
        let g = prepared("void f(){int x = 1;\nint y = x;}", None);
        let mut sink = SinkModel::init(&[8, 10, 2], 0.5, 1);
        for t in sink.tensors_mut() {
            t.fill(0.0);
        }
        let report = finite_diff_check(GradCheckTarget::Sink(&sink), &g, 1e-4);
        assert!(report.max_rel_err.is_finite());
        assert!(report.passed(), "report: {:?}", report.per_tensor);
    }
}
