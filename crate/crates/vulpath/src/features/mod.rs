//! Node features: 128-dimensional skip-gram embeddings trained over random
//! walks on the CPG. A node's tokens are its kind name followed by the
//! alphanumeric pieces of its code (numeric literals collapse to `NUM`);
//! its feature vector is the mean of its token embeddings.

mod skipgram;
mod walks;

pub use skipgram::{train_skipgram, SkipGramParams, TrainedEmbedding};
pub use walks::generate_walks;

use crate::frontend::{CodePropertyGraph, CpgNode};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Embedding dimensionality used across the pipeline.
pub const EMBED_DIMS: usize = 128;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("cannot train embeddings on an empty corpus")]
    EmptyCorpus,
    #[error("embedding checkpoint is malformed: {0}")]
    BadCheckpoint(String),
}

/// Token inventory with UNK reserved at index 0.
#[derive(Debug, Clone)]
pub struct TokenVocab {
    pub tokens: Vec<String>,
    pub counts: Vec<u64>,
    index: BTreeMap<String, usize>,
}

pub const UNK: &str = "UNK";

impl TokenVocab {
    /// Build from token sequences; tokens ordered by descending frequency
    /// (ties lexicographic) after the UNK slot.
    pub fn build(sequences: &[Vec<String>]) -> TokenVocab {
        let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
        for seq in sequences {
            for tok in seq {
                *counts.entry(tok.as_str()).or_insert(0) += 1;
            }
        }
        counts.remove(UNK);
        let mut ordered: Vec<(&str, u64)> = counts.into_iter().collect();
        ordered.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let mut tokens = vec![UNK.to_string()];
        let mut freq = vec![0u64];
        for (tok, count) in ordered {
            tokens.push(tok.to_string());
            freq.push(count);
        }
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        TokenVocab {
            tokens,
            counts: freq,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 1
    }

    /// Index of a token, falling back to UNK.
    pub fn lookup(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }
}

/// Trained token embeddings realizing the node vectorizer.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    pub dims: usize,
    pub vocab: Vec<String>,
    pub vectors: Array2<f64>,
    index: BTreeMap<String, usize>,
}

impl EmbeddingTable {
    pub fn new(vocab: Vec<String>, vectors: Array2<f64>) -> EmbeddingTable {
        let dims = vectors.ncols();
        let index = vocab
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        EmbeddingTable {
            dims,
            vocab,
            vectors,
            index,
        }
    }

    pub fn token_index(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    /// Mean of the token embeddings of a node's token list.
    pub fn embed_tokens(&self, tokens: &[String]) -> Vec<f64> {
        let mut row = vec![0.0; self.dims];
        if tokens.is_empty() {
            return row;
        }
        for tok in tokens {
            let idx = self.token_index(tok);
            for (acc, v) in row.iter_mut().zip(self.vectors.row(idx).iter()) {
                *acc += v;
            }
        }
        let scale = 1.0 / tokens.len() as f64;
        for v in &mut row {
            *v *= scale;
        }
        row
    }
}

/// Serialized form of an embedding checkpoint.
#[derive(Debug, Serialize, Deserialize)]
pub struct EmbeddingCheckpoint {
    pub dims: usize,
    pub vocab: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
}

impl From<&EmbeddingTable> for EmbeddingCheckpoint {
    fn from(table: &EmbeddingTable) -> Self {
        EmbeddingCheckpoint {
            dims: table.dims,
            vocab: table.vocab.clone(),
            vectors: table
                .vectors
                .rows()
                .into_iter()
                .map(|r| r.to_vec())
                .collect(),
        }
    }
}

impl TryFrom<EmbeddingCheckpoint> for EmbeddingTable {
    type Error = FeatureError;

    fn try_from(ckpt: EmbeddingCheckpoint) -> Result<EmbeddingTable, FeatureError> {
        if ckpt.vocab.len() != ckpt.vectors.len() {
            return Err(FeatureError::BadCheckpoint(format!(
                "vocab has {} entries but vectors has {} rows",
                ckpt.vocab.len(),
                ckpt.vectors.len()
            )));
        }
        let rows = ckpt.vectors.len();
        let mut flat = Vec::with_capacity(rows * ckpt.dims);
        for row in &ckpt.vectors {
            if row.len() != ckpt.dims {
                return Err(FeatureError::BadCheckpoint(format!(
                    "vector row has {} entries, expected {}",
                    row.len(),
                    ckpt.dims
                )));
            }
            flat.extend_from_slice(row);
        }
        let vectors = Array2::from_shape_vec((rows, ckpt.dims), flat)
            .map_err(|e| FeatureError::BadCheckpoint(e.to_string()))?;
        Ok(EmbeddingTable::new(ckpt.vocab, vectors))
    }
}

/// Tokens of one node: kind name first, then code pieces split on
/// non-alphanumerics (underscores bind), numeric literals mapped to NUM.
pub fn tokenize_node(node: &CpgNode) -> Vec<String> {
    let mut tokens = vec![node.kind.name().to_string()];
    for piece in node
        .code
        .split(|c: char| !c.is_ascii_alphanumeric() && c != '_')
    {
        if piece.is_empty() {
            continue;
        }
        if piece.chars().next().is_some_and(|c| c.is_ascii_digit()) {
            tokens.push("NUM".to_string());
        } else {
            tokens.push(piece.to_string());
        }
    }
    tokens
}

/// Feature matrix: one row per node in ascending node-id order.
pub fn node_feature_matrix(cpg: &CodePropertyGraph, table: &EmbeddingTable) -> Array2<f64> {
    let ids = cpg.ordered_node_ids();
    let mut out = Array2::zeros((ids.len(), table.dims));
    for (row, &id) in ids.iter().enumerate() {
        let node = cpg.node(id).expect("ordered ids come from the node set");
        let emb = table.embed_tokens(&tokenize_node(node));
        for (col, v) in emb.into_iter().enumerate() {
            out[[row, col]] = v;
        }
    }
    out
}
