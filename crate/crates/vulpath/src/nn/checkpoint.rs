//! Model checkpoints: JSON documents carrying the architecture dims, all
//! tensors (trainable parameters, running statistics, and the token
//! embedding table), the training config echo, and the seed. The digest is
//! the MD5 of the canonical serialization (object keys sorted).

use super::detector::DetectorModel;
use super::layers::GcnLayerParams;
use super::sink::SinkModel;
use crate::corpus::hex_string;
use crate::features::EmbeddingTable;
use md5::{Digest, Md5};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint is malformed: {0}")]
    Malformed(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointDoc {
    arch: String,
    dims: Vec<usize>,
    tensors: BTreeMap<String, Vec<Vec<f64>>>,
    config: Value,
    seed: u64,
}

fn to_rows(t: &Array2<f64>) -> Vec<Vec<f64>> {
    t.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn from_rows(rows: &[Vec<f64>], name: &str) -> Result<Array2<f64>, CheckpointError> {
    let nrows = rows.len();
    let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
    let mut flat = Vec::with_capacity(nrows * ncols);
    for row in rows {
        if row.len() != ncols {
            return Err(CheckpointError::Malformed(format!(
                "tensor {name} has ragged rows"
            )));
        }
        flat.extend_from_slice(row);
    }
    Array2::from_shape_vec((nrows, ncols), flat)
        .map_err(|e| CheckpointError::Malformed(format!("tensor {name}: {e}")))
}

fn layer_tensors(tensors: &mut BTreeMap<String, Vec<Vec<f64>>>, l: usize, layer: &GcnLayerParams) {
    tensors.insert(format!("layer{l}.weight"), to_rows(&layer.weight));
    tensors.insert(format!("layer{l}.gamma"), to_rows(&layer.gamma));
    tensors.insert(format!("layer{l}.beta"), to_rows(&layer.beta));
    tensors.insert(
        format!("layer{l}.running_mean"),
        to_rows(&layer.running_mean),
    );
    tensors.insert(format!("layer{l}.running_var"), to_rows(&layer.running_var));
}

fn layer_from_tensors(
    tensors: &BTreeMap<String, Vec<Vec<f64>>>,
    l: usize,
) -> Result<GcnLayerParams, CheckpointError> {
    let get = |suffix: &str| -> Result<Array2<f64>, CheckpointError> {
        let name = format!("layer{l}.{suffix}");
        let rows = tensors
            .get(&name)
            .ok_or_else(|| CheckpointError::Malformed(format!("missing tensor {name}")))?;
        from_rows(rows, &name)
    };
    Ok(GcnLayerParams {
        weight: get("weight")?,
        gamma: get("gamma")?,
        beta: get("beta")?,
        running_mean: get("running_mean")?,
        running_var: get("running_var")?,
    })
}

fn embedding_tensors(
    tensors: &mut BTreeMap<String, Vec<Vec<f64>>>,
    config: &mut serde_json::Map<String, Value>,
    table: &EmbeddingTable,
) {
    tensors.insert("embedding".to_string(), to_rows(&table.vectors));
    config.insert(
        "vocab".to_string(),
        Value::Array(table.vocab.iter().map(|t| Value::String(t.clone())).collect()),
    );
}

fn embedding_from_doc(doc: &CheckpointDoc) -> Result<EmbeddingTable, CheckpointError> {
    let rows = doc
        .tensors
        .get("embedding")
        .ok_or_else(|| CheckpointError::Malformed("missing embedding tensor".into()))?;
    let vectors = from_rows(rows, "embedding")?;
    let vocab: Vec<String> = doc
        .config
        .get("vocab")
        .and_then(|v| v.as_array())
        .ok_or_else(|| CheckpointError::Malformed("missing vocab in config".into()))?
        .iter()
        .map(|v| v.as_str().unwrap_or_default().to_string())
        .collect();
    if vocab.len() != vectors.nrows() {
        return Err(CheckpointError::Malformed(
            "vocab and embedding row counts differ".into(),
        ));
    }
    Ok(EmbeddingTable::new(vocab, vectors))
}

/// Sink-model checkpoint bundling the classifier and its embedding table.
pub struct SinkCheckpoint;

impl SinkCheckpoint {
    pub fn to_value(
        model: &SinkModel,
        table: &EmbeddingTable,
        config_echo: Value,
        seed: u64,
    ) -> Value {
        let mut tensors = BTreeMap::new();
        for (l, layer) in model.layers.iter().enumerate() {
            layer_tensors(&mut tensors, l, layer);
        }
        tensors.insert("skip_proj".to_string(), to_rows(&model.skip_proj));
        let mut config = serde_json::Map::new();
        config.insert("dropout_p".to_string(), serde_json::json!(model.dropout_p));
        config.insert("train".to_string(), config_echo);
        embedding_tensors(&mut tensors, &mut config, table);
        serde_json::to_value(CheckpointDoc {
            arch: "sink".to_string(),
            dims: model.dims.clone(),
            tensors,
            config: Value::Object(config),
            seed,
        })
        .expect("checkpoint serializes")
    }

    pub fn from_value(doc: &Value) -> Result<(SinkModel, EmbeddingTable, u64), CheckpointError> {
        let doc: CheckpointDoc = serde_json::from_value(doc.clone())?;
        if doc.arch != "sink" {
            return Err(CheckpointError::Malformed(format!(
                "expected arch \"sink\", found {:?}",
                doc.arch
            )));
        }
        let layer_count = doc.dims.len() - 1;
        let mut layers = Vec::with_capacity(layer_count);
        for l in 0..layer_count {
            layers.push(layer_from_tensors(&doc.tensors, l)?);
        }
        let skip_proj = from_rows(
            doc.tensors
                .get("skip_proj")
                .ok_or_else(|| CheckpointError::Malformed("missing skip_proj".into()))?,
            "skip_proj",
        )?;
        let dropout_p = doc
            .config
            .get("dropout_p")
            .and_then(|v| v.as_f64())
            .unwrap_or(0.5);
        let table = embedding_from_doc(&doc)?;
        Ok((
            SinkModel {
                layers,
                skip_proj,
                dropout_p,
                dims: doc.dims,
            },
            table,
            doc.seed,
        ))
    }
}

/// Detector checkpoint bundling the graph classifier and its embeddings.
pub struct DetectorCheckpoint;

impl DetectorCheckpoint {
    pub fn to_value(
        model: &DetectorModel,
        table: &EmbeddingTable,
        config_echo: Value,
        seed: u64,
    ) -> Value {
        let mut tensors = BTreeMap::new();
        for (l, layer) in model.layers.iter().enumerate() {
            layer_tensors(&mut tensors, l, layer);
        }
        tensors.insert("readout_w".to_string(), to_rows(&model.readout_w));
        tensors.insert("readout_b".to_string(), to_rows(&model.readout_b));
        let mut config = serde_json::Map::new();
        config.insert("train".to_string(), config_echo);
        embedding_tensors(&mut tensors, &mut config, table);
        serde_json::to_value(CheckpointDoc {
            arch: "detector".to_string(),
            dims: model.dims.clone(),
            tensors,
            config: Value::Object(config),
            seed,
        })
        .expect("checkpoint serializes")
    }

    pub fn from_value(
        doc: &Value,
    ) -> Result<(DetectorModel, EmbeddingTable, u64), CheckpointError> {
        let doc: CheckpointDoc = serde_json::from_value(doc.clone())?;
        if doc.arch != "detector" {
            return Err(CheckpointError::Malformed(format!(
                "expected arch \"detector\", found {:?}",
                doc.arch
            )));
        }
        let layer_count = doc.dims.len() - 1;
        let mut layers = Vec::with_capacity(layer_count);
        for l in 0..layer_count {
            layers.push(layer_from_tensors(&doc.tensors, l)?);
        }
        let readout_w = from_rows(
            doc.tensors
                .get("readout_w")
                .ok_or_else(|| CheckpointError::Malformed("missing readout_w".into()))?,
            "readout_w",
        )?;
        let readout_b = from_rows(
            doc.tensors
                .get("readout_b")
                .ok_or_else(|| CheckpointError::Malformed("missing readout_b".into()))?,
            "readout_b",
        )?;
        let table = embedding_from_doc(&doc)?;
        Ok((
            DetectorModel {
                layers,
                readout_w,
                readout_b,
                dims: doc.dims,
            },
            table,
            doc.seed,
        ))
    }
}

/// MD5 digest of the canonical JSON serialization.
pub fn checkpoint_digest(doc: &Value) -> String {
    let text = serde_json::to_string(doc).expect("checkpoint serializes");
    let mut hasher = Md5::new();
    hasher.update(text.as_bytes());
    hex_string(&hasher.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> EmbeddingTable {
        EmbeddingTable::new(
            vec!["UNK".into(), "x".into()],
            ndarray::array![[0.1, 0.2], [0.3, 0.4]],
        )
    }

    #[test]
    fn sink_checkpoint_round_trips() {
        let model = SinkModel::init(&[2, 4, 4, 2], 0.5, 11);
        let doc = SinkCheckpoint::to_value(&model, &table(), serde_json::json!({}), 11);
        let (back, embed, seed) = SinkCheckpoint::from_value(&doc).unwrap();
        assert_eq!(seed, 11);
        assert_eq!(back.dims, model.dims);
        assert_eq!(back.skip_proj, model.skip_proj);
        for (a, b) in back.layers.iter().zip(&model.layers) {
            assert_eq!(a.weight, b.weight);
            assert_eq!(a.running_var, b.running_var);
        }
        assert_eq!(embed.vocab, vec!["UNK", "x"]);
    }

    #[test]
    fn detector_checkpoint_round_trips() {
        let model = DetectorModel::init(&[2, 4, 4], 7);
        let doc = DetectorCheckpoint::to_value(&model, &table(), serde_json::json!({}), 7);
        let (back, _, _) = DetectorCheckpoint::from_value(&doc).unwrap();
        assert_eq!(back.readout_w, model.readout_w);
        assert_eq!(back.layers[1].weight, model.layers[1].weight);
    }

    #[test]
    fn digest_is_stable_and_content_sensitive() {
        let model = SinkModel::init(&[2, 4, 2], 0.5, 3);
        let doc = SinkCheckpoint::to_value(&model, &table(), serde_json::json!({}), 3);
        assert_eq!(checkpoint_digest(&doc), checkpoint_digest(&doc));
        let model2 = SinkModel::init(&[2, 4, 2], 0.5, 4);
        let doc2 = SinkCheckpoint::to_value(&model2, &table(), serde_json::json!({}), 4);
        assert_ne!(checkpoint_digest(&doc), checkpoint_digest(&doc2));
    }

    #[test]
    fn wrong_arch_is_rejected() {
        let model = DetectorModel::init(&[2, 4, 4], 7);
        let doc = DetectorCheckpoint::to_value(&model, &table(), serde_json::json!({}), 7);
        assert!(SinkCheckpoint::from_value(&doc).is_err());
    }
}
