//! Layer primitives: GCN layer parameters, batch normalization (train and
//! eval), ReLU, and inverted dropout.

use super::BN_EPS;
use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Parameters of one graph-convolution layer: the projection plus its
/// batch-norm scale/shift and running statistics. Vector-shaped tensors are
/// stored 1 x d so every parameter is uniformly two-dimensional.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnLayerParams {
    pub weight: Array2<f64>,       // in x out
    pub gamma: Array2<f64>,        // 1 x out
    pub beta: Array2<f64>,         // 1 x out
    pub running_mean: Array2<f64>, // 1 x out
    pub running_var: Array2<f64>,  // 1 x out
}

impl GcnLayerParams {
    /// Glorot-uniform weight, identity batch norm.
    pub fn init(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> GcnLayerParams {
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let mut weight = Array2::zeros((in_dim, out_dim));
        for v in weight.iter_mut() {
            *v = rng.gen_range(-bound..bound);
        }
        GcnLayerParams {
            weight,
            gamma: Array2::ones((1, out_dim)),
            beta: Array2::zeros((1, out_dim)),
            running_mean: Array2::zeros((1, out_dim)),
            running_var: Array2::ones((1, out_dim)),
        }
    }

    pub fn zeroed(in_dim: usize, out_dim: usize) -> GcnLayerParams {
        GcnLayerParams {
            weight: Array2::zeros((in_dim, out_dim)),
            gamma: Array2::ones((1, out_dim)),
            beta: Array2::zeros((1, out_dim)),
            running_mean: Array2::zeros((1, out_dim)),
            running_var: Array2::ones((1, out_dim)),
        }
    }
}

/// Values cached by a train-mode batch-norm forward, enough to run the
/// backward pass and to update running statistics afterwards.
#[derive(Debug, Clone)]
pub struct BnCache {
    pub mean: Array1<f64>,
    pub var: Array1<f64>,
    pub xhat: Array2<f64>,
}

/// Train-mode batch norm: per-column standardization over the batch with
/// the biased variance. Returns the output and the cache; running stats
/// are *not* mutated here (see [`update_running_stats`]).
pub fn batchnorm_train(x: &Array2<f64>, layer: &GcnLayerParams) -> (Array2<f64>, BnCache) {
    let n = x.nrows().max(1) as f64;
    let mean = x.sum_axis(Axis(0)) / n;
    let centered = x - &mean.view().insert_axis(Axis(0));
    let var = centered.mapv(|v| v * v).sum_axis(Axis(0)) / n;
    let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
    let xhat = &centered * &inv_std.view().insert_axis(Axis(0));
    let out = &xhat * &layer.gamma.row(0).insert_axis(Axis(0)) + &layer.beta.row(0).insert_axis(Axis(0));
    (out, BnCache { mean, var, xhat })
}

/// Eval-mode batch norm using running statistics.
pub fn batchnorm_eval(x: &Array2<f64>, layer: &GcnLayerParams) -> Array2<f64> {
    let inv_std = layer.running_var.row(0).mapv(|v| 1.0 / (v + BN_EPS).sqrt());
    let xhat = (x - &layer.running_mean.row(0).insert_axis(Axis(0)))
        * &inv_std.insert_axis(Axis(0));
    &xhat * &layer.gamma.row(0).insert_axis(Axis(0)) + &layer.beta.row(0).insert_axis(Axis(0))
}

/// Fold the cached batch statistics into the running estimates.
pub fn update_running_stats(layer: &mut GcnLayerParams, cache: &BnCache, momentum: f64) {
    for (r, &b) in layer
        .running_mean
        .row_mut(0)
        .iter_mut()
        .zip(cache.mean.iter())
    {
        *r = (1.0 - momentum) * *r + momentum * b;
    }
    for (r, &b) in layer
        .running_var
        .row_mut(0)
        .iter_mut()
        .zip(cache.var.iter())
    {
        *r = (1.0 - momentum) * *r + momentum * b;
    }
}


/// Batch-norm backward (train mode). Returns (dx, dgamma, dbeta).
pub fn batchnorm_backward(
    dy: &Array2<f64>,
    cache: &BnCache,
    layer: &GcnLayerParams,
) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let n = dy.nrows().max(1) as f64;
    let dgamma = (dy * &cache.xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
    let dbeta = dy.sum_axis(Axis(0)).insert_axis(Axis(0));
    let dxhat = dy * &layer.gamma.row(0).insert_axis(Axis(0));
    let inv_std = cache.var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
    let mean_dxhat = dxhat.sum_axis(Axis(0)) / n;
    let mean_dxhat_xhat = (&dxhat * &cache.xhat).sum_axis(Axis(0)) / n;
    let dx = (&dxhat
        - &mean_dxhat.view().insert_axis(Axis(0))
        - &(&cache.xhat * &mean_dxhat_xhat.view().insert_axis(Axis(0))))
        * &inv_std.view().insert_axis(Axis(0));
    (dx, dgamma, dbeta)
}

/// Eval-mode batch-norm backward: the transform is a fixed affine map.
pub fn batchnorm_eval_backward(dy: &Array2<f64>, layer: &GcnLayerParams) -> Array2<f64> {
    let scale = layer
        .gamma
        .row(0)
        .iter()
        .zip(layer.running_var.row(0).iter())
        .map(|(g, v)| g / (v + BN_EPS).sqrt())
        .collect::<Array1<f64>>();
    dy * &scale.insert_axis(Axis(0))
}

pub fn relu(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| if v > 0.0 { v } else { 0.0 })
}

/// Inverted dropout. Train mode returns the output and the scaled keep
/// mask (entries 0 or 1/(1-p)); eval mode is the identity.
pub fn dropout(
    x: &Array2<f64>,
    p: f64,
    train: bool,
    seed: u64,
) -> (Array2<f64>, Option<Array2<f64>>) {
    assert!((0.0..1.0).contains(&p), "dropout probability in [0, 1)");
    if !train || p == 0.0 {
        return (x.clone(), None);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (1.0 - p);
    let mut mask = Array2::zeros(x.raw_dim());
    for v in mask.iter_mut() {
        if rng.gen::<f64>() >= p {
            *v = scale;
        }
    }
    (x * &mask, Some(mask))
}
