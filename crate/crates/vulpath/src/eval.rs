//! Evaluation: node-classification metrics for the sink model, triggering
//! line coverage for the explanation methods, and corpus-level aggregation
//! comparing methods against the same detector.

use crate::baselines::{edge_mask_explain, rule_based_sinks, rule_sink_statements, EdgeMaskConfig};
use crate::corpus::CorpusEntry;
use crate::features::node_feature_matrix;
use crate::pipeline::{
    graph_entries, pooled_paths, predicted_sink_statements, GraphedEntry, TrainedPipeline,
};
use crate::ranker::select_explanation;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("TLC is undefined for an empty ground-truth set")]
    EmptyGroundTruth,
    #[error("the test split is empty")]
    EmptyTestSplit,
}

/// Node-classification metrics for the sink class.
#[derive(Debug, Clone, Serialize)]
pub struct NodeMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1_sink: f64,
    pub f1_macro: f64,
    /// confusion[truth][pred] with 0 = non-sink, 1 = sink.
    pub confusion: [[usize; 2]; 2],
    /// Set when a zero denominator forced a metric to 0.
    pub zero_division: bool,
}

/// Precision/recall/F1 for the sink class plus macro F1.
pub fn node_metrics(predictions: &[bool], labels: &[bool]) -> NodeMetrics {
    assert_eq!(predictions.len(), labels.len(), "equal lengths");
    let mut confusion = [[0usize; 2]; 2];
    for (&p, &y) in predictions.iter().zip(labels) {
        confusion[y as usize][p as usize] += 1;
    }
    let mut zero_division = false;
    fn ratio(num: usize, den: usize, flag: &mut bool) -> f64 {
        if den == 0 {
            *flag = true;
            0.0
        } else {
            num as f64 / den as f64
        }
    }
    let tp = confusion[1][1];
    let fp = confusion[0][1];
    let fn_ = confusion[1][0];
    let tn = confusion[0][0];
    let precision = ratio(tp, tp + fp, &mut zero_division);
    let recall = ratio(tp, tp + fn_, &mut zero_division);
    let f1_sink = if precision + recall == 0.0 {
        zero_division = true;
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    let neg_precision = ratio(tn, tn + fn_, &mut zero_division);
    let neg_recall = ratio(tn, tn + fp, &mut zero_division);
    let f1_neg = if neg_precision + neg_recall == 0.0 {
        zero_division = true;
        0.0
    } else {
        2.0 * neg_precision * neg_recall / (neg_precision + neg_recall)
    };
    NodeMetrics {
        precision,
        recall,
        f1_sink,
        f1_macro: (f1_sink + f1_neg) / 2.0,
        confusion,
        zero_division,
    }
}

/// Triggering line coverage: |s_e ∩ s_v| / |s_v|.
pub fn tlc(s_e: &BTreeSet<u32>, s_v: &BTreeSet<u32>) -> Result<f64, EvalError> {
    if s_v.is_empty() {
        return Err(EvalError::EmptyGroundTruth);
    }
    Ok(s_e.intersection(s_v).count() as f64 / s_v.len() as f64)
}

/// Per-function evaluation record.
#[derive(Debug, Clone, Serialize)]
pub struct FunctionRecord {
    pub id: String,
    pub vulnerable: bool,
    pub ground_truth: Vec<u32>,
    /// method -> predicted line set.
    pub predicted: BTreeMap<String, Vec<u32>>,
    /// method -> TLC (vulnerable functions only).
    pub tlc: BTreeMap<String, f64>,
    pub detector_probability: f64,
}

/// Corpus-level evaluation report.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub detector_name: String,
    pub per_function: Vec<FunctionRecord>,
    pub mean_tlc: BTreeMap<String, f64>,
    pub sink_metrics: NodeMetrics,
    pub detector_accuracy: f64,
    pub evaluated: usize,
    pub skipped: Vec<(String, String)>,
}

pub const METHOD_VULPATH: &str = "vulpath";
pub const METHOD_RULES: &str = "rules";
pub const METHOD_EDGE_MASK: &str = "edge_mask";

pub fn all_methods() -> Vec<String> {
    vec![
        METHOD_VULPATH.to_string(),
        METHOD_RULES.to_string(),
        METHOD_EDGE_MASK.to_string(),
    ]
}

struct FunctionEval {
    record: FunctionRecord,
    predictions: Vec<bool>,
    labels: Vec<bool>,
}

fn evaluate_function(
    graphed: &GraphedEntry,
    pipeline: &TrainedPipeline,
    methods: &[String],
) -> Result<FunctionEval, String> {
    let cpg = &graphed.cpg;
    let entry = &graphed.entry;
    let features = node_feature_matrix(cpg, &pipeline.embedding);
    let probs =
        crate::nn::sink_forward(cpg, &features, &pipeline.sink).map_err(|e| e.to_string())?;
    let ids = cpg.ordered_node_ids();
    let aligned = crate::corpus::align_labels(entry, cpg).map_err(|e| e.to_string())?;
    let mut predictions = Vec::with_capacity(aligned.len());
    let mut labels = Vec::with_capacity(aligned.len());
    for (id, y) in &aligned {
        let row = ids.binary_search(id).expect("statement id present");
        predictions.push(probs[[row, 1]] > 0.5);
        labels.push(*y);
    }
    let detector_probability =
        crate::nn::detector_forward(cpg, &features, &pipeline.detector).map_err(|e| e.to_string())?;

    let mut predicted: BTreeMap<String, Vec<u32>> = BTreeMap::new();
    let mut tlc_scores: BTreeMap<String, f64> = BTreeMap::new();
    let s_v: BTreeSet<u32> = entry.sink_lines.iter().copied().collect();
    // path-based explanation lines are only needed for TLC, which is
    // defined on vulnerable functions
    if !s_v.is_empty() {
        for method in methods {
            let lines: BTreeSet<u32> = match method.as_str() {
                METHOD_VULPATH => {
                    let psps = predicted_sink_statements(cpg, &features, &pipeline.sink)
                        .map_err(|e| e.to_string())?;
                    let sinks: Vec<_> = psps.iter().map(|(id, _)| *id).collect();
                    let paths = pooled_paths(cpg, &sinks, &pipeline.config.slicer)
                        .map_err(|e| e.to_string())?;
                    match select_explanation(cpg, &paths, &features, &pipeline.detector) {
                        Ok(explanation) => explanation.chosen.lines.iter().copied().collect(),
                        Err(_) => BTreeSet::new(),
                    }
                }
                METHOD_RULES => {
                    let hits = rule_based_sinks(cpg, &pipeline.config.baseline.sensitive_apis);
                    let sinks = rule_sink_statements(cpg, &hits);
                    let paths = pooled_paths(cpg, &sinks, &pipeline.config.slicer)
                        .map_err(|e| e.to_string())?;
                    match select_explanation(cpg, &paths, &features, &pipeline.detector) {
                        Ok(explanation) => explanation.chosen.lines.iter().copied().collect(),
                        Err(_) => BTreeSet::new(),
                    }
                }
                METHOD_EDGE_MASK => {
                    let config = EdgeMaskConfig {
                        lambda: pipeline.config.baseline.lambda,
                        steps: pipeline.config.baseline.steps,
                        lr: pipeline.config.baseline.mask_lr,
                        top_k: pipeline.config.baseline.top_k,
                    };
                    let outcome = edge_mask_explain(cpg, &features, &pipeline.detector, &config)
                        .map_err(|e| e.to_string())?;
                    outcome.lines.iter().copied().collect()
                }
                other => return Err(format!("unknown method {other:?}")),
            };
            let score = tlc(&lines, &s_v).expect("vulnerable entries have sinks");
            predicted.insert(method.clone(), lines.into_iter().collect());
            tlc_scores.insert(method.clone(), score);
        }
    }

    Ok(FunctionEval {
        record: FunctionRecord {
            id: entry.id.clone(),
            vulnerable: entry.vulnerable,
            ground_truth: entry.sink_lines.iter().copied().collect(),
            predicted,
            tlc: tlc_scores,
            detector_probability,
        },
        predictions,
        labels,
    })
}

/// Evaluate every test entry with every method. Frontend or labeling
/// failures are skipped and listed in the report. `jobs` bounds the
/// per-function parallelism; results are order-stable regardless.
pub fn evaluate_corpus(
    test: &[CorpusEntry],
    pipeline: &TrainedPipeline,
    methods: &[String],
    jobs: usize,
) -> Result<EvalReport, EvalError> {
    if test.is_empty() {
        return Err(EvalError::EmptyTestSplit);
    }
    let (graphed, mut skipped) = graph_entries(test);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool builds");
    let results: Vec<Result<FunctionEval, (String, String)>> = pool.install(|| {
        graphed
            .par_iter()
            .map(|g| {
                evaluate_function(g, pipeline, methods)
                    .map_err(|e| (g.entry.id.clone(), e))
            })
            .collect()
    });

    let mut per_function = Vec::new();
    let mut predictions = Vec::new();
    let mut labels = Vec::new();
    let mut detector_correct = 0usize;
    let mut evaluated = 0usize;
    for result in results {
        match result {
            Ok(eval) => {
                predictions.extend(eval.predictions);
                labels.extend(eval.labels);
                if (eval.record.detector_probability > 0.5) == eval.record.vulnerable {
                    detector_correct += 1;
                }
                evaluated += 1;
                per_function.push(eval.record);
            }
            Err(skip) => skipped.push(skip),
        }
    }
    if evaluated == 0 {
        return Err(EvalError::EmptyTestSplit);
    }

    let mut mean_tlc = BTreeMap::new();
    for method in methods {
        let scores: Vec<f64> = per_function
            .iter()
            .filter_map(|r| r.tlc.get(method))
            .copied()
            .collect();
        if !scores.is_empty() {
            mean_tlc.insert(
                method.clone(),
                scores.iter().sum::<f64>() / scores.len() as f64,
            );
        }
    }

    Ok(EvalReport {
        detector_name: "gcn-detector".to_string(),
        per_function,
        mean_tlc,
        sink_metrics: node_metrics(&predictions, &labels),
        detector_accuracy: detector_correct as f64 / evaluated as f64,
        evaluated,
        skipped,
    })
}

/// Plain-text summary: sink metrics then the method-by-detector TLC table.
pub fn report_table(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str("sink point detection\n");
    out.push_str(&format!(
        "  precision {:.4}  recall {:.4}  f1-macro {:.4}\n",
        report.sink_metrics.precision, report.sink_metrics.recall, report.sink_metrics.f1_macro
    ));
    let c = &report.sink_metrics.confusion;
    out.push_str(&format!(
        "  confusion  tn {} fp {} / fn {} tp {}\n",
        c[0][0], c[0][1], c[1][0], c[1][1]
    ));
    out.push_str(&format!(
        "detector accuracy {:.4} over {} functions ({} skipped)\n",
        report.detector_accuracy,
        report.evaluated,
        report.skipped.len()
    ));
    out.push_str(&format!(
        "mean TLC by method ({})\n",
        report.detector_name
    ));
    for (method, score) in &report.mean_tlc {
        out.push_str(&format!("  {method:<12} {score:.4}\n"));
    }
    out
}
