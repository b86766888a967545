//! Skip-gram with negative sampling over token sequences, trained
//! single-threaded for bit-for-bit reproducibility. Negative samples come
//! from the unigram distribution raised to 3/4; the learning rate is held
//! constant. The returned table is the input-side matrix.

use super::{EmbeddingTable, FeatureError, TokenVocab};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct SkipGramParams {
    pub dims: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for SkipGramParams {
    fn default() -> Self {
        SkipGramParams {
            dims: super::EMBED_DIMS,
            window: 2,
            negatives: 5,
            epochs: 5,
            lr: 0.025,
            seed: 1,
        }
    }
}

/// Embedding table plus the mean pair loss observed in each epoch.
#[derive(Debug, Clone)]
pub struct TrainedEmbedding {
    pub table: EmbeddingTable,
    pub epoch_losses: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Train skip-gram embeddings on the walk corpus.
pub fn train_skipgram(
    sequences: &[Vec<String>],
    params: &SkipGramParams,
) -> Result<TrainedEmbedding, FeatureError> {
    let vocab = TokenVocab::build(sequences);
    if vocab.is_empty() {
        return Err(FeatureError::EmptyCorpus);
    }
    let v = vocab.len();
    let dims = params.dims;

    let mut init_rng = ChaCha8Rng::seed_from_u64(params.seed);
    let bound = 0.5 / dims as f64;
    let mut input = Array2::<f64>::zeros((v, dims));
    for i in 0..v {
        for d in 0..dims {
            input[[i, d]] = init_rng.gen_range(-bound..bound);
        }
    }
    let mut output = Array2::<f64>::zeros((v, dims));

    // cumulative unigram^0.75 table for negative sampling
    let weights: Vec<f64> = vocab.counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
    let mut cumulative = Vec::with_capacity(v);
    let mut total = 0.0;
    for w in &weights {
        total += w;
        cumulative.push(total);
    }

    let encoded: Vec<Vec<usize>> = sequences
        .iter()
        .map(|seq| seq.iter().map(|t| vocab.lookup(t)).collect())
        .collect();

    let mut train_rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(0xA5A5_A5A5));
    let mut epoch_losses = Vec::with_capacity(params.epochs);
    let mut grad_center = vec![0.0; dims];

    for _ in 0..params.epochs {
        let mut loss_sum = 0.0;
        let mut pair_count = 0u64;
        for seq in &encoded {
            for (i, &center) in seq.iter().enumerate() {
                let lo = i.saturating_sub(params.window);
                let hi = (i + params.window).min(seq.len() - 1);
                for j in lo..=hi {
                    if j == i {
                        continue;
                    }
                    let context = seq[j];
                    grad_center.iter_mut().for_each(|g| *g = 0.0);
                    let mut pair_loss = 0.0;

                    // positive pair
                    {
                        let dot: f64 = (0..dims)
                            .map(|d| input[[center, d]] * output[[context, d]])
                            .sum();
                        let s = sigmoid(dot);
                        pair_loss -= s.max(1e-12).ln();
                        let coef = params.lr * (1.0 - s);
                        for d in 0..dims {
                            grad_center[d] += coef * output[[context, d]];
                            output[[context, d]] += coef * input[[center, d]];
                        }
                    }
                    // negative samples
                    for _ in 0..params.negatives {
                        let pick = train_rng.gen_range(0.0..total.max(f64::MIN_POSITIVE));
                        let neg = match cumulative
                            .binary_search_by(|c| c.partial_cmp(&pick).unwrap())
                        {
                            Ok(idx) | Err(idx) => idx.min(v - 1),
                        };
                        if neg == context {
                            continue;
                        }
                        let dot: f64 = (0..dims)
                            .map(|d| input[[center, d]] * output[[neg, d]])
                            .sum();
                        let s = sigmoid(dot);
                        pair_loss -= (1.0 - s).max(1e-12).ln();
                        let coef = -params.lr * s;
                        for d in 0..dims {
                            grad_center[d] += coef * output[[neg, d]];
                            output[[neg, d]] += coef * input[[center, d]];
                        }
                    }
                    for d in 0..dims {
                        input[[center, d]] += grad_center[d];
                    }
                    loss_sum += pair_loss;
                    pair_count += 1;
                }
            }
        }
        epoch_losses.push(if pair_count == 0 {
            0.0
        } else {
            loss_sum / pair_count as f64
        });
    }

    Ok(TrainedEmbedding {
        table: EmbeddingTable::new(vocab.tokens.clone(), input),
        epoch_losses,
    })
}
