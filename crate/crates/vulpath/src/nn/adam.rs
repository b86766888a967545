//! Bias-corrected Adam over a fixed-order list of parameter tensors.

use ndarray::Array2;

#[derive(Debug, Clone)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl AdamState {
    /// Moments start at zero with the given tensor shapes.
    pub fn new(lr: f64, shapes: &[(usize, usize)]) -> AdamState {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: shapes.iter().map(|&(r, c)| Array2::zeros((r, c))).collect(),
            v: shapes.iter().map(|&(r, c)| Array2::zeros((r, c))).collect(),
        }
    }

    /// One update across all tensors; `params` and `grads` must align with
    /// the shapes given at construction.
    pub fn step(&mut self, params: &mut [&mut Array2<f64>], grads: &[Array2<f64>]) {
        assert_eq!(params.len(), self.m.len(), "tensor count mismatch");
        assert_eq!(grads.len(), self.m.len(), "gradient count mismatch");
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for ((param, grad), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            ndarray::Zip::from(&mut **param)
                .and(grad)
                .and(&mut *m)
                .and(&mut *v)
                .for_each(|p, &g, m, v| {
                    *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                    *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
                });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut p = array![[1.0, -2.0], [0.5, 3.0]];
        let g = array![[0.3, -0.7], [2.0, 0.0001]];
        let mut adam = AdamState::new(1e-3, &[(2, 2)]);
        let before = p.clone();
        adam.step(&mut [&mut p], &[g.clone()]);
        for i in 0..2 {
            for j in 0..2 {
                let delta = p[[i, j]] - before[[i, j]];
                let expected = -1e-3 * g[[i, j]].signum();
                assert!(
                    (delta - expected).abs() < 1e-6,
                    "delta {delta} expected {expected}"
                );
            }
        }
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = array![[1.0, 2.0]];
        let g = Array2::zeros((1, 2));
        let mut adam = AdamState::new(0.01, &[(1, 2)]);
        adam.step(&mut [&mut p], &[g]);
        assert_eq!(p, array![[1.0, 2.0]]);
    }

    #[test]
    fn identical_runs_take_identical_trajectories() {
        let run = || {
            let mut p = array![[0.4, -0.1]];
            let mut adam = AdamState::new(0.05, &[(1, 2)]);
            for k in 0..20 {
                let g = array![[p[[0, 0]] * 2.0 + k as f64 * 0.01, p[[0, 1]] - 1.0]];
                adam.step(&mut [&mut p], &[g]);
            }
            p
        };
        assert_eq!(run(), run());
    }
}
