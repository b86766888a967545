//! Dense numeric kernel and the two graph models: the 6-layer GCN sink
//! classifier and the 3-layer graph-level detector. Everything is f64 and
//! single-threaded during training so fixed seeds give bit-identical
//! checkpoints; forward passes against a frozen model are safe to run
//! concurrently.

mod adam;
mod adjacency;
mod batch;
mod checkpoint;
mod detector;
mod gradcheck;
mod layers;
mod loss;
mod sink;

pub use adam::AdamState;
pub use adjacency::{normalized_adjacency, NormAdj};
pub use batch::{oversample_to_parity, BatchedGraphs, PreparedGraph};
pub use checkpoint::{checkpoint_digest, DetectorCheckpoint, SinkCheckpoint};
pub use detector::{detector_forward, train_detector, DetectorModel, DetectorTrainConfig};
pub use gradcheck::{finite_diff_check, GradCheckReport, GradCheckTarget};
pub use layers::{batchnorm_eval, batchnorm_train, dropout, relu, BnCache, GcnLayerParams};
pub use loss::{weighted_bce_with_logit, weighted_ce_with_logits, weighted_cross_entropy};
pub use sink::{sink_forward, train_sink, SinkModel, SinkTrainConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },
    #[error("graph has no statement nodes")]
    EmptyGraph,
    #[error("training split has no positive sink nodes")]
    NoPositives,
    #[error("training split contains a single class only")]
    SingleClass,
}

/// Batch-norm epsilon shared by both models.
pub const BN_EPS: f64 = 1e-5;
/// Running-statistics momentum.
pub const BN_MOMENTUM: f64 = 0.1;
