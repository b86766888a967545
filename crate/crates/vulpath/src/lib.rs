//! Explainable vulnerability path discovery over code property graphs.
//!
//! The pipeline has four stages: a C-subset frontend builds a code property
//! graph (AST + CFG + CDG + DDG) per function, a graph convolutional node
//! classifier flags candidate sink statements, backward slicing enumerates
//! dependence paths into each candidate sink, and a graph-level detector
//! scores each path's induced subgraph so the highest-importance path can be
//! reported as the explanation.

pub mod baselines;
pub mod corpus;
pub mod eval;
pub mod features;
pub mod frontend;
pub mod nn;
pub mod pipeline;
pub mod ranker;
pub mod slicer;

pub use frontend::{build_cpg, CodePropertyGraph, CpgEdge, CpgNode, EdgeKind, NodeKind};
