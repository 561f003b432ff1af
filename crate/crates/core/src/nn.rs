//! Minimal neural-network machinery: dense layers, activations, inverted
//! dropout, soft-label binary cross-entropy, Adam, and a step learning-rate
//! schedule.
//!
//! Everything operates on `f64` vectors. Weights are stored row-major
//! (`out_dim x in_dim`) so checkpoints serialize without reshaping. Shape
//! contracts are programmer errors and panic; data-dependent failures
//! (non-finite gradients) are `Result`s.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fully connected layer computing `y = W x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// Row-major `out_dim x in_dim`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl DenseLayer {
    /// Zero-initialized layer.
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        DenseLayer {
            weights: vec![0.0; out_dim * in_dim],
            bias: vec![0.0; out_dim],
            in_dim,
            out_dim,
        }
    }

    /// Xavier-uniform init: weights from `U(-limit, limit)` with
    /// `limit = sqrt(6 / (fan_in + fan_out))`, bias zero.
    pub fn xavier(out_dim: usize, in_dim: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights = (0..out_dim * in_dim)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        DenseLayer { weights, bias: vec![0.0; out_dim], in_dim, out_dim }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(
            x.len(),
            self.in_dim,
            "dense forward: input length {} does not match in_dim {}",
            x.len(),
            self.in_dim
        );
        let mut y = self.bias.clone();
        for (row, out) in y.iter_mut().enumerate() {
            let w = &self.weights[row * self.in_dim..(row + 1) * self.in_dim];
            let mut acc = 0.0;
            for (wi, xi) in w.iter().zip(x) {
                acc += wi * xi;
            }
            *out += acc;
        }
        y
    }

    /// Propagates `delta` back through the weights: returns `W^T delta`.
    pub fn backward_input(&self, delta: &[f64]) -> Vec<f64> {
        assert_eq!(
            delta.len(),
            self.out_dim,
            "dense backward: delta length {} does not match out_dim {}",
            delta.len(),
            self.out_dim
        );
        let mut grad_x = vec![0.0; self.in_dim];
        for (row, d) in delta.iter().enumerate() {
            let w = &self.weights[row * self.in_dim..(row + 1) * self.in_dim];
            for (gx, wi) in grad_x.iter_mut().zip(w) {
                *gx += wi * d;
            }
        }
        grad_x
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect()
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Multiplicative mask produced by [`dropout_forward`]. Entries are 0 for
/// dropped coordinates and `1/(1-p)` for kept ones, so applying the same mask
/// in the backward pass routes zero gradient through dropped coordinates.
pub type DropoutMask = Vec<f64>;

/// Inverted dropout. In train mode each coordinate is dropped with
/// probability `p` and survivors are scaled by `1/(1-p)`; in eval mode the
/// input passes through untouched and the mask is all ones.
pub fn dropout_forward(
    x: &[f64],
    p: f64,
    train: bool,
    rng: &mut impl Rng,
) -> (Vec<f64>, DropoutMask) {
    assert!((0.0..1.0).contains(&p), "dropout probability {p} outside [0, 1)");
    if !train || p == 0.0 {
        return (x.to_vec(), vec![1.0; x.len()]);
    }
    let scale = 1.0 / (1.0 - p);
    let mask: DropoutMask = x
        .iter()
        .map(|_| if rng.random::<f64>() < p { 0.0 } else { scale })
        .collect();
    let y = x.iter().zip(&mask).map(|(xi, mi)| xi * mi).collect();
    (y, mask)
}

/// Probability clamp applied inside the loss so log terms stay finite.
pub const BCE_EPS: f64 = 1e-7;

/// Binary cross-entropy with soft labels. `prediction` is clamped to
/// `[BCE_EPS, 1 - BCE_EPS]`; `target` may be any value in `[0, 1]`.
pub fn bce_loss(prediction: f64, target: f64) -> f64 {
    let p = prediction.clamp(BCE_EPS, 1.0 - BCE_EPS);
    -(target * p.ln() + (1.0 - target) * (1.0 - p).ln())
}

/// Adam moment estimates for one parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step_count: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update applied in place.
///
/// A non-finite gradient aborts before any parameter is touched and names
/// the offending parameter group.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
    group: &str,
) -> Result<()> {
    assert_eq!(
        params.len(),
        grads.len(),
        "adam step: gradient length {} does not match parameter length {} in group {group}",
        grads.len(),
        params.len()
    );
    assert_eq!(
        params.len(),
        state.first_moment.len(),
        "adam step: state length {} does not match parameter length {} in group {group}",
        state.first_moment.len(),
        params.len()
    );
    if let Some(idx) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::Training(format!(
            "non-finite gradient at index {idx} in parameter group {group}"
        )));
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.first_moment.iter_mut().zip(state.second_moment.iter_mut()))
    {
        *m = state.beta1 * *m + (1.0 - state.beta1) * g;
        *v = state.beta2 * *v + (1.0 - state.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}

/// Step decay schedule: the rate halves (by `decay_factor`) every
/// `decay_every` epochs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    pub initial_lr: f64,
    pub decay_factor: f64,
    pub decay_every: u32,
}

impl SchedulerConfig {
    pub fn new(initial_lr: f64, decay_factor: f64, decay_every: u32) -> Result<Self> {
        if decay_every == 0 {
            return Err(Error::Config("scheduler decay_every must be at least 1".into()));
        }
        if initial_lr.is_nan() || initial_lr <= 0.0 {
            return Err(Error::Config(format!(
                "scheduler initial_lr must be positive, got {initial_lr}"
            )));
        }
        if !(decay_factor > 0.0 && decay_factor <= 1.0) {
            return Err(Error::Config(format!(
                "scheduler decay_factor must be in (0, 1], got {decay_factor}"
            )));
        }
        Ok(SchedulerConfig { initial_lr, decay_factor, decay_every })
    }

    /// Learning rate for a zero-based epoch index:
    /// `initial_lr * decay_factor^(epoch / decay_every)`.
    pub fn lr_at(&self, epoch: u32) -> f64 {
        self.initial_lr * self.decay_factor.powi((epoch / self.decay_every) as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn layer_2x2() -> DenseLayer {
        DenseLayer { weights: vec![1.0, 2.0, 3.0, 4.0], bias: vec![1.0, 1.0], in_dim: 2, out_dim: 2 }
    }

    #[test]
    fn dense_forward_hand_example() {
        let y = layer_2x2().forward(&[1.0, 1.0]);
        assert_eq!(y, vec![4.0, 8.0]);
    }

    #[test]
    #[should_panic(expected = "does not match in_dim")]
    fn dense_forward_rejects_bad_shape() {
        layer_2x2().forward(&[1.0, 2.0, 3.0]);
    }

    #[test]
    fn dense_forward_identity_passes_input_through() {
        let eye = DenseLayer {
            weights: vec![1.0, 0.0, 0.0, 1.0],
            bias: vec![0.0, 0.0],
            in_dim: 2,
            out_dim: 2,
        };
        assert_eq!(eye.forward(&[0.7, -0.2]), vec![0.7, -0.2]);
        assert_eq!(DenseLayer::zeros(2, 2).forward(&[0.7, -0.2]), vec![0.0, 0.0]);
    }

    #[test]
    fn dense_backward_input_is_w_transpose_delta() {
        let g = layer_2x2().backward_input(&[1.0, 1.0]);
        assert_eq!(g, vec![4.0, 6.0]);
    }

    #[test]
    fn xavier_respects_fan_limits() {
        let mut rng = stream(3, "init");
        let layer = DenseLayer::xavier(16, 8, &mut rng);
        let limit = (6.0 / 24.0f64).sqrt();
        assert!(layer.weights.iter().all(|w| w.abs() < limit));
        assert!(layer.bias.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn relu_clamps_negatives() {
        assert_eq!(relu(&[-1.0, 0.0, 2.5]), vec![0.0, 0.0, 2.5]);
    }

    #[test]
    fn sigmoid_fixed_points() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(40.0) - 1.0).abs() < 1e-15);
        assert!(sigmoid(-40.0) < 1e-15);
    }

    #[test]
    fn sigmoid_symmetry() {
        for i in 0..100 {
            let x = -10.0 + 0.2 * i as f64;
            assert!((sigmoid(-x) - (1.0 - sigmoid(x))).abs() < 1e-15, "x = {x}");
        }
    }

    #[test]
    fn dropout_eval_is_identity() {
        let mut rng = stream(5, "dropout");
        let x = vec![1.0, -2.0, 3.0];
        let (y, mask) = dropout_forward(&x, 0.5, false, &mut rng);
        assert_eq!(y, x);
        assert!(mask.iter().all(|&m| m == 1.0));
    }

    #[test]
    fn dropout_zero_p_is_identity_in_train() {
        let mut rng = stream(5, "dropout");
        let x = vec![1.0, -2.0, 3.0];
        let (y, _) = dropout_forward(&x, 0.0, true, &mut rng);
        assert_eq!(y, x);
    }

    #[test]
    fn dropout_scales_survivors_exactly() {
        let mut rng = stream(5, "dropout");
        let p = 0.2;
        let x = vec![2.0; 64];
        let (y, mask) = dropout_forward(&x, p, true, &mut rng);
        let scale = 1.0 / (1.0 - p);
        for (yi, mi) in y.iter().zip(&mask) {
            assert!(*mi == 0.0 || *mi == scale);
            assert_eq!(*yi, 2.0 * mi);
        }
    }

    #[test]
    fn dropout_survivor_fraction_in_binomial_bounds() {
        let mut rng = stream(21, "dropout");
        let x = vec![1.0; 1000];
        let (y, _) = dropout_forward(&x, 0.5, true, &mut rng);
        let survivors = y.iter().filter(|&&v| v != 0.0).count();
        assert!((440..=560).contains(&survivors), "survivors {survivors}");
        assert!(y.iter().all(|&v| v == 0.0 || v == 2.0));
    }

    #[test]
    fn dropout_preserves_expectation() {
        let mut rng = stream(11, "dropout");
        let x = vec![1.0; 100];
        let mut total = 0.0;
        let draws = 10_000;
        for _ in 0..draws {
            let (y, _) = dropout_forward(&x, 0.2, true, &mut rng);
            total += y.iter().sum::<f64>();
        }
        let mean = total / (draws as f64 * x.len() as f64);
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn bce_known_values() {
        assert!((bce_loss(0.5, 0.0) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((bce_loss(0.5, 0.73) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((bce_loss(0.9, 1.0) + 0.9f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn bce_clamps_extremes() {
        let loss = bce_loss(0.0, 1.0);
        assert!((loss + BCE_EPS.ln()).abs() < 1e-9);
        assert!(bce_loss(1.0, 1.0) >= 0.0);
        assert!(bce_loss(0.0, 0.0) >= 0.0);
    }

    #[test]
    fn adam_first_step_magnitude_is_lr() {
        let mut params = vec![0.0];
        let mut state = AdamState::new(1);
        adam_step(&mut params, &[1.0], &mut state, 1e-3, "w").unwrap();
        let expected = 1e-3 / (1.0 + 1e-8);
        assert!((params[0] + expected).abs() < 1e-12, "params[0] = {}", params[0]);
    }

    #[test]
    fn adam_constant_gradient_keeps_unit_ratio() {
        let mut params = vec![0.0];
        let mut state = AdamState::new(1);
        for _ in 0..3 {
            adam_step(&mut params, &[1.0], &mut state, 1e-3, "w").unwrap();
        }
        assert!((params[0] + 3e-3).abs() < 1e-6, "params[0] = {}", params[0]);
    }

    #[test]
    fn adam_zero_gradient_only_bumps_step_count() {
        let mut params = vec![0.5, -0.25];
        let mut state = AdamState::new(2);
        adam_step(&mut params, &[0.0, 0.0], &mut state, 1e-3, "w").unwrap();
        assert_eq!(params, vec![0.5, -0.25]);
        assert_eq!(state.step_count, 1);
    }

    #[test]
    fn adam_rejects_non_finite_gradients() {
        let mut params = vec![0.0, 0.0];
        let mut state = AdamState::new(2);
        let err = adam_step(&mut params, &[0.0, f64::NAN], &mut state, 1e-3, "fuse.weights")
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("fuse.weights"), "message: {msg}");
        assert!(msg.contains("index 1"), "message: {msg}");
        assert_eq!(params, vec![0.0, 0.0]);
    }

    #[test]
    fn scheduler_halves_on_boundaries() {
        let cfg = SchedulerConfig::new(1e-4, 0.5, 50).unwrap();
        assert_eq!(cfg.lr_at(0), 1e-4);
        assert_eq!(cfg.lr_at(49), 1e-4);
        assert_eq!(cfg.lr_at(50), 5e-5);
        assert_eq!(cfg.lr_at(99), 5e-5);
        assert_eq!(cfg.lr_at(100), 2.5e-5);
    }

    #[test]
    fn scheduler_rejects_zero_period() {
        assert!(SchedulerConfig::new(1e-4, 0.5, 0).is_err());
    }
}
