//! Class-weighted losses. The contract-level cross entropy takes
//! probabilities; training uses the fused softmax form for stability.

use ndarray::Array2;

const CLAMP: f64 = 1e-12;

/// Mean over rows of -w_y * ln p_y, probabilities clamped to
/// [1e-12, 1 - 1e-12]. Returns the loss and its exact gradient with
/// respect to the probabilities (zero where the clamp is active).
pub fn weighted_cross_entropy(
    probs: &Array2<f64>,
    labels: &[usize],
    class_weights: &[f64],
) -> (f64, Array2<f64>) {
    assert_eq!(probs.nrows(), labels.len(), "one label per row");
    let n = labels.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = Array2::zeros(probs.raw_dim());
    for (i, &y) in labels.iter().enumerate() {
        let w = class_weights[y];
        let p = probs[[i, y]];
        let clamped = p.clamp(CLAMP, 1.0 - CLAMP);
        loss += -w * clamped.ln() / n;
        if p > CLAMP && p < 1.0 - CLAMP {
            grad[[i, y]] = -w / (clamped * n);
        }
    }
    (loss, grad)
}

/// Row-wise softmax.
pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Fused softmax + weighted cross entropy: returns the loss and the
/// gradient with respect to the logits.
pub fn weighted_ce_with_logits(
    logits: &Array2<f64>,
    labels: &[usize],
    class_weights: &[f64],
) -> (f64, Array2<f64>) {
    let probs = softmax_rows(logits);
    let n = labels.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = probs.clone();
    for (i, &y) in labels.iter().enumerate() {
        let w = class_weights[y];
        loss += -w * probs[[i, y]].clamp(CLAMP, 1.0).ln() / n;
        let mut row = grad.row_mut(i);
        for (j, g) in row.iter_mut().enumerate() {
            let delta = if j == y { 1.0 } else { 0.0 };
            *g = w * (*g - delta) / n;
        }
    }
    (loss, grad)
}

/// Weighted binary cross entropy on a batch of logits (one scalar score
/// per graph). Returns the loss and d loss / d score.
pub fn weighted_bce_with_logit(
    scores: &[f64],
    labels: &[bool],
    class_weights: &[f64; 2],
) -> (f64, Vec<f64>) {
    assert_eq!(scores.len(), labels.len());
    let n = scores.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(scores.len());
    for (&score, &label) in scores.iter().zip(labels) {
        let p = 1.0 / (1.0 + (-score).exp());
        let (w, target) = if label {
            (class_weights[1], 1.0)
        } else {
            (class_weights[0], 0.0)
        };
        let p_y = if label { p } else { 1.0 - p };
        loss += -w * p_y.clamp(CLAMP, 1.0).ln() / n;
        grads.push(w * (p - target) / n);
    }
    (loss, grads)
}
