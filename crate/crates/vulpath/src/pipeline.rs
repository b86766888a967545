//! End-to-end wiring: configuration, graph preparation, embedding and
//! model training, sink prediction, and explanation of single functions.

use crate::corpus::{align_labels, dedup_md5, split_corpus, Bucket, CorpusEntry, SplitAssignment};
use crate::features::{
    generate_walks, node_feature_matrix, train_skipgram, EmbeddingTable, SkipGramParams,
    EMBED_DIMS,
};
use crate::frontend::{build_cpg, CodePropertyGraph, NodeId};
use crate::nn::{
    train_detector, train_sink, DetectorModel, DetectorTrainConfig, NormAdj, PreparedGraph,
    SinkModel, SinkTrainConfig,
};
use crate::ranker::{select_explanation, Explanation};
use crate::slicer::{enumerate_paths, CandidatePath};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error(transparent)]
    Frontend(#[from] crate::frontend::FrontendError),
    #[error(transparent)]
    Feature(#[from] crate::features::FeatureError),
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
    #[error(transparent)]
    Rank(#[from] crate::ranker::RankError),
    #[error(transparent)]
    Slice(#[from] crate::slicer::SliceError),
    #[error("no usable graphs in the {0} split")]
    EmptySplit(&'static str),
}

fn d_seed() -> u64 {
    42
}
fn d_dims() -> usize {
    EMBED_DIMS
}
fn d_walks_per_node() -> usize {
    10
}
fn d_walk_len() -> usize {
    8
}
fn d_window() -> usize {
    2
}
fn d_negatives() -> usize {
    5
}
fn d_embed_epochs() -> usize {
    5
}
fn d_embed_lr() -> f64 {
    0.025
}
fn d_graph_cap() -> usize {
    128
}
fn d_sink_layers() -> usize {
    6
}
fn d_sink_hidden() -> usize {
    256
}
fn d_dropout() -> f64 {
    0.5
}
fn d_lr() -> f64 {
    1e-3
}
fn d_epochs() -> usize {
    50
}
fn d_batch() -> usize {
    64
}
fn d_patience() -> Option<usize> {
    Some(12)
}
fn d_det_layers() -> usize {
    3
}
fn d_det_hidden() -> usize {
    128
}
fn d_max_depth() -> usize {
    16
}
fn d_max_paths() -> usize {
    256
}
fn d_lambda() -> f64 {
    0.05
}
fn d_steps() -> usize {
    200
}
fn d_top_k() -> usize {
    10
}
fn d_mask_lr() -> f64 {
    0.05
}
fn d_train_frac() -> f64 {
    0.7
}
fn d_val_frac() -> f64 {
    0.1
}
fn d_test_frac() -> f64 {
    0.2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingConfig {
    #[serde(default = "d_dims")]
    pub dims: usize,
    #[serde(default = "d_walks_per_node")]
    pub walks_per_node: usize,
    #[serde(default = "d_walk_len")]
    pub walk_len: usize,
    #[serde(default = "d_window")]
    pub window: usize,
    #[serde(default = "d_negatives")]
    pub negatives: usize,
    #[serde(default = "d_embed_epochs")]
    pub epochs: usize,
    #[serde(default = "d_embed_lr")]
    pub lr: f64,
    /// Walk corpus is drawn from at most this many training graphs.
    #[serde(default = "d_graph_cap")]
    pub graph_cap: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults populate")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinkConfig {
    #[serde(default = "d_sink_layers")]
    pub layers: usize,
    #[serde(default = "d_sink_hidden")]
    pub hidden: usize,
    #[serde(default = "d_dropout")]
    pub dropout: f64,
    #[serde(default = "d_lr")]
    pub lr: f64,
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    #[serde(default = "d_batch")]
    pub batch: usize,
    #[serde(default = "d_patience")]
    pub patience: Option<usize>,
}

impl Default for SinkConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults populate")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    #[serde(default = "d_det_layers")]
    pub layers: usize,
    #[serde(default = "d_det_hidden")]
    pub hidden: usize,
    #[serde(default = "d_lr")]
    pub lr: f64,
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    #[serde(default = "d_batch")]
    pub batch: usize,
    #[serde(default = "d_patience")]
    pub patience: Option<usize>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults populate")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlicerConfig {
    #[serde(default = "d_max_depth")]
    pub max_depth: usize,
    #[serde(default = "d_max_paths")]
    pub max_paths: usize,
}

impl Default for SlicerConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults populate")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    #[serde(default = "crate::baselines::default_sensitive_apis")]
    pub sensitive_apis: Vec<String>,
    #[serde(default = "d_lambda")]
    pub lambda: f64,
    #[serde(default = "d_steps")]
    pub steps: usize,
    #[serde(default = "d_top_k")]
    pub top_k: usize,
    #[serde(default = "d_mask_lr")]
    pub mask_lr: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults populate")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    #[serde(default = "d_train_frac")]
    pub train: f64,
    #[serde(default = "d_val_frac")]
    pub validation: f64,
    #[serde(default = "d_test_frac")]
    pub test: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults populate")
    }
}

/// Whole-run configuration; unknown keys are rejected, absent keys take
/// the documented defaults. `VULPATH_SEED` overrides the seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default)]
    pub embedding: EmbeddingConfig,
    #[serde(default)]
    pub sink: SinkConfig,
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default)]
    pub slicer: SlicerConfig,
    #[serde(default)]
    pub baseline: BaselineConfig,
    #[serde(default)]
    pub split: SplitConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults populate")
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn with_env_seed(mut self) -> RunConfig {
        if let Ok(seed) = std::env::var("VULPATH_SEED") {
            if let Ok(seed) = seed.parse() {
                self.seed = seed;
            }
        }
        self
    }
}

/// A corpus entry with its built graph.
pub struct GraphedEntry {
    pub entry: CorpusEntry,
    pub cpg: CodePropertyGraph,
}

/// Build CPGs for all entries; parse failures are returned as (id, error)
/// pairs rather than aborting the run.
pub fn graph_entries(entries: &[CorpusEntry]) -> (Vec<GraphedEntry>, Vec<(String, String)>) {
    let mut graphed = Vec::with_capacity(entries.len());
    let mut failures = Vec::new();
    for entry in entries {
        match build_cpg(&entry.source) {
            Ok(cpg) => graphed.push(GraphedEntry {
                entry: entry.clone(),
                cpg,
            }),
            Err(e) => failures.push((entry.id.clone(), e.to_string())),
        }
    }
    (graphed, failures)
}

/// Features, statement rows, and labels for one graphed entry.
pub fn prepare_graph(
    graphed: &GraphedEntry,
    table: &EmbeddingTable,
) -> Result<PreparedGraph, PipelineError> {
    let features = node_feature_matrix(&graphed.cpg, table);
    let ids = graphed.cpg.ordered_node_ids();
    let labels = align_labels(&graphed.entry, &graphed.cpg)?;
    let statement_rows: Vec<usize> = labels
        .iter()
        .map(|(id, _)| ids.binary_search(id).expect("statement id in node set"))
        .collect();
    let statement_labels: Vec<bool> = labels.iter().map(|(_, y)| *y).collect();
    Ok(PreparedGraph {
        id: graphed.entry.id.clone(),
        adj: NormAdj::from_cpg(&graphed.cpg),
        features,
        statement_rows,
        statement_labels,
        vulnerable: graphed.entry.vulnerable,
    })
}

/// Everything a trained run produces.
pub struct TrainedPipeline {
    pub sink: SinkModel,
    pub detector: DetectorModel,
    pub embedding: EmbeddingTable,
    pub config: RunConfig,
}

fn mix(seed: u64, a: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x2545F4914F6CDD1D);
    z = (z ^ (z >> 28)).wrapping_mul(0x9E3779B97F4A7C15);
    z ^ (z >> 31)
}

/// Train token embeddings over walks from (a capped sample of) the given
/// graphs.
pub fn train_embeddings(
    graphs: &[&CodePropertyGraph],
    config: &RunConfig,
) -> Result<EmbeddingTable, PipelineError> {
    let mut order: Vec<usize> = (0..graphs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(mix(config.seed, 0xE4BED));
    order.shuffle(&mut rng);
    order.truncate(config.embedding.graph_cap.max(1));
    order.sort_unstable();
    let mut sequences = Vec::new();
    for (k, &gi) in order.iter().enumerate() {
        sequences.extend(generate_walks(
            graphs[gi],
            config.embedding.walks_per_node,
            config.embedding.walk_len,
            mix(config.seed, k as u64),
        ));
    }
    let params = SkipGramParams {
        dims: config.embedding.dims,
        window: config.embedding.window,
        negatives: config.embedding.negatives,
        epochs: config.embedding.epochs,
        lr: config.embedding.lr,
        seed: config.seed,
    };
    Ok(train_skipgram(&sequences, &params)?.table)
}

/// Deduplicate, split, embed, and train both models.
pub fn train_pipeline(
    entries: Vec<CorpusEntry>,
    config: &RunConfig,
) -> Result<(TrainedPipeline, SplitAssignment), PipelineError> {
    let entries = dedup_md5(entries);
    let split = split_corpus(
        &entries,
        config.seed,
        (config.split.train, config.split.validation, config.split.test),
    )?;
    let (graphed, _failures) = graph_entries(&entries);
    let in_bucket = |bucket: Bucket| -> Vec<&GraphedEntry> {
        graphed
            .iter()
            .filter(|g| split.buckets.get(&g.entry.id) == Some(&bucket))
            .collect()
    };
    let train_graphs = in_bucket(Bucket::Train);
    let val_graphs = in_bucket(Bucket::Validation);
    if train_graphs.is_empty() {
        return Err(PipelineError::EmptySplit("train"));
    }
    if val_graphs.is_empty() {
        return Err(PipelineError::EmptySplit("validation"));
    }

    let cpg_refs: Vec<&CodePropertyGraph> = train_graphs.iter().map(|g| &g.cpg).collect();
    let embedding = train_embeddings(&cpg_refs, config)?;

    let mut train_prepared = Vec::with_capacity(train_graphs.len());
    for g in &train_graphs {
        train_prepared.push(prepare_graph(g, &embedding)?);
    }
    let mut val_prepared = Vec::with_capacity(val_graphs.len());
    for g in &val_graphs {
        val_prepared.push(prepare_graph(g, &embedding)?);
    }

    let sink_config = SinkTrainConfig {
        hidden: config.sink.hidden,
        layers: config.sink.layers,
        dropout: config.sink.dropout,
        lr: config.sink.lr,
        epochs: config.sink.epochs,
        batch_size: config.sink.batch,
        seed: config.seed,
        patience: config.sink.patience,
    };
    let sink = train_sink(&train_prepared, &val_prepared, &sink_config)?;

    let detector_config = DetectorTrainConfig {
        hidden: config.detector.hidden,
        layers: config.detector.layers,
        lr: config.detector.lr,
        epochs: config.detector.epochs,
        batch_size: config.detector.batch,
        seed: mix(config.seed, 0xDE7EC7),
        patience: config.detector.patience,
    };
    let detector = train_detector(&train_prepared, &val_prepared, &detector_config)?;

    Ok((
        TrainedPipeline {
            sink,
            detector,
            embedding,
            config: config.clone(),
        },
        split,
    ))
}

/// Statement nodes the sink model flags (sink probability > 0.5). When no
/// statement crosses the threshold the highest-probability statement is
/// returned so the slicing stage always has a starting point.
pub fn predicted_sink_statements(
    cpg: &CodePropertyGraph,
    features: &Array2<f64>,
    sink: &SinkModel,
) -> Result<Vec<(NodeId, f64)>, PipelineError> {
    let probs = crate::nn::sink_forward(cpg, features, sink)?;
    let ids = cpg.ordered_node_ids();
    let mut flagged = Vec::new();
    let mut best: Option<(NodeId, f64)> = None;
    for (row, &id) in ids.iter().enumerate() {
        if !cpg.node(id).map(|n| n.is_statement).unwrap_or(false) {
            continue;
        }
        let p = probs[[row, 1]];
        if p > 0.5 {
            flagged.push((id, p));
        }
        if best.map(|(_, b)| p > b).unwrap_or(true) {
            best = Some((id, p));
        }
    }
    if flagged.is_empty() {
        if let Some(best) = best {
            flagged.push(best);
        }
    }
    Ok(flagged)
}

/// Candidate paths pooled over all given sink statements, in ascending
/// sink order, truncated at the configured cap.
pub fn pooled_paths(
    cpg: &CodePropertyGraph,
    sinks: &[NodeId],
    config: &SlicerConfig,
) -> Result<Vec<CandidatePath>, PipelineError> {
    let mut pool = Vec::new();
    let mut sorted: Vec<NodeId> = sinks.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    for sink in sorted {
        let remaining = config.max_paths.saturating_sub(pool.len());
        if remaining == 0 {
            break;
        }
        pool.extend(enumerate_paths(cpg, sink, config.max_depth, remaining)?);
    }
    Ok(pool)
}

/// Full explanation of one function with the trained models: predict
/// sinks, slice, score, select.
pub fn explain_function(
    cpg: &CodePropertyGraph,
    pipeline: &TrainedPipeline,
) -> Result<Explanation, PipelineError> {
    let features = node_feature_matrix(cpg, &pipeline.embedding);
    let psps = predicted_sink_statements(cpg, &features, &pipeline.sink)?;
    let sinks: Vec<NodeId> = psps.iter().map(|(id, _)| *id).collect();
    let paths = pooled_paths(cpg, &sinks, &pipeline.config.slicer)?;
    Ok(select_explanation(
        cpg,
        &paths,
        &features,
        &pipeline.detector,
    )?)
}
