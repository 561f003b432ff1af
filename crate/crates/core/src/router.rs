//! Dual-branch feature-fusion router.
//!
//! A semantic branch (dense + ReLU + dropout) and a metadata branch
//! (dense + ReLU) are concatenated, passed through a fusion layer, and
//! squashed to a single probability that the step needs the strong tier.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{dropout_forward, relu, sigmoid, DenseLayer, DropoutMask};

/// The two model tiers a step can route to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelTier {
    Strong,
    Weak,
}

impl std::fmt::Display for ModelTier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelTier::Strong => write!(f, "strong"),
            ModelTier::Weak => write!(f, "weak"),
        }
    }
}

/// Architecture and routing hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouterConfig {
    pub d_in: usize,
    pub d_meta: usize,
    pub d_sem: usize,
    pub d_struct: usize,
    pub d_fuse: usize,
    pub dropout_p: f64,
    pub threshold: f64,
}

impl Default for RouterConfig {
    fn default() -> Self {
        RouterConfig {
            d_in: 1536,
            d_meta: 6,
            d_sem: 128,
            d_struct: 16,
            d_fuse: 64,
            dropout_p: 0.2,
            threshold: 0.5,
        }
    }
}

impl RouterConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, dim) in [
            ("d_in", self.d_in),
            ("d_meta", self.d_meta),
            ("d_sem", self.d_sem),
            ("d_struct", self.d_struct),
            ("d_fuse", self.d_fuse),
        ] {
            if dim == 0 {
                return Err(Error::Config(format!("router dimension {name} must be positive")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!(
                "dropout_p {} outside [0, 1)",
                self.dropout_p
            )));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config(format!(
                "threshold {} outside open (0, 1)",
                self.threshold
            )));
        }
        Ok(())
    }

    /// Width of the concatenated joint vector.
    pub fn d_joint(&self) -> usize {
        self.d_sem + self.d_struct
    }
}

/// All trainable tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouterParams {
    pub text_layer: DenseLayer,
    pub meta_layer: DenseLayer,
    pub fuse_layer: DenseLayer,
    pub out_head: DenseLayer,
}

impl RouterParams {
    /// Xavier-uniform init in a fixed layer order (text, meta, fuse, out)
    /// so a given init stream always yields the same parameters.
    pub fn init(cfg: &RouterConfig, rng: &mut impl Rng) -> Self {
        RouterParams {
            text_layer: DenseLayer::xavier(cfg.d_sem, cfg.d_in, rng),
            meta_layer: DenseLayer::xavier(cfg.d_struct, cfg.d_meta, rng),
            fuse_layer: DenseLayer::xavier(cfg.d_fuse, cfg.d_joint(), rng),
            out_head: DenseLayer::xavier(1, cfg.d_fuse, rng),
        }
    }

    pub fn zeros(cfg: &RouterConfig) -> Self {
        RouterParams {
            text_layer: DenseLayer::zeros(cfg.d_sem, cfg.d_in),
            meta_layer: DenseLayer::zeros(cfg.d_struct, cfg.d_meta),
            fuse_layer: DenseLayer::zeros(cfg.d_fuse, cfg.d_joint()),
            out_head: DenseLayer::zeros(1, cfg.d_fuse),
        }
    }

    /// Checks shapes against `cfg` and that every entry is finite.
    pub fn validate(&self, cfg: &RouterConfig) -> Result<()> {
        let shapes = [
            ("text_layer", &self.text_layer, cfg.d_sem, cfg.d_in),
            ("meta_layer", &self.meta_layer, cfg.d_struct, cfg.d_meta),
            ("fuse_layer", &self.fuse_layer, cfg.d_fuse, cfg.d_joint()),
            ("out_head", &self.out_head, 1, cfg.d_fuse),
        ];
        for (name, layer, out_dim, in_dim) in shapes {
            if layer.out_dim != out_dim || layer.in_dim != in_dim {
                return Err(Error::Format(format!(
                    "layer {name} has shape {}x{}, expected {out_dim}x{in_dim}",
                    layer.out_dim, layer.in_dim
                )));
            }
            if layer.weights.len() != out_dim * in_dim || layer.bias.len() != out_dim {
                return Err(Error::Format(format!(
                    "layer {name} tensor lengths disagree with its declared shape"
                )));
            }
            if layer.weights.iter().chain(&layer.bias).any(|v| !v.is_finite()) {
                return Err(Error::Format(format!("layer {name} contains non-finite entries")));
            }
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.text_layer.param_count()
            + self.meta_layer.param_count()
            + self.fuse_layer.param_count()
            + self.out_head.param_count()
    }
}

/// Per-tensor gradients mirroring [`RouterParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouterGrads {
    pub text_layer: LayerGrads,
    pub meta_layer: LayerGrads,
    pub fuse_layer: LayerGrads,
    pub out_head: LayerGrads,
}

impl RouterGrads {
    pub fn zeros(cfg: &RouterConfig) -> Self {
        let zero = |out_dim: usize, in_dim: usize| LayerGrads {
            weights: vec![0.0; out_dim * in_dim],
            bias: vec![0.0; out_dim],
        };
        RouterGrads {
            text_layer: zero(cfg.d_sem, cfg.d_in),
            meta_layer: zero(cfg.d_struct, cfg.d_meta),
            fuse_layer: zero(cfg.d_fuse, cfg.d_joint()),
            out_head: zero(1, cfg.d_fuse),
        }
    }

    /// Accumulates `other`, used when averaging over a minibatch.
    pub fn add(&mut self, other: &RouterGrads) {
        for (mine, theirs) in [
            (&mut self.text_layer, &other.text_layer),
            (&mut self.meta_layer, &other.meta_layer),
            (&mut self.fuse_layer, &other.fuse_layer),
            (&mut self.out_head, &other.out_head),
        ] {
            for (a, b) in mine.weights.iter_mut().zip(&theirs.weights) {
                *a += b;
            }
            for (a, b) in mine.bias.iter_mut().zip(&theirs.bias) {
                *a += b;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for grads in [
            &mut self.text_layer,
            &mut self.meta_layer,
            &mut self.fuse_layer,
            &mut self.out_head,
        ] {
            for g in grads.weights.iter_mut().chain(grads.bias.iter_mut()) {
                *g *= factor;
            }
        }
    }
}

/// Intermediate activations of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct RouterActivations {
    /// Semantic branch output, after ReLU and dropout.
    pub h_sem: Vec<f64>,
    pub h_meta: Vec<f64>,
    /// Exact concatenation `[h_sem; h_meta]`.
    pub h_joint: Vec<f64>,
    pub h_fuse: Vec<f64>,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    Train,
    Eval,
}

/// Runs the fused forward pass. The returned mask is all ones in eval mode;
/// in train mode it is the dropout mask to feed back into
/// [`router_backward`]. Eval mode draws nothing from `rng`.
pub fn router_forward(
    params: &RouterParams,
    cfg: &RouterConfig,
    x_sem: &[f64],
    v_meta: &[f64],
    mode: ForwardMode,
    rng: &mut impl Rng,
) -> (RouterActivations, DropoutMask) {
    assert_eq!(
        x_sem.len(),
        cfg.d_in,
        "semantic branch: input length {} does not match d_in {}",
        x_sem.len(),
        cfg.d_in
    );
    assert_eq!(
        v_meta.len(),
        cfg.d_meta,
        "meta branch: input length {} does not match d_meta {}",
        v_meta.len(),
        cfg.d_meta
    );
    let sem_relu = relu(&params.text_layer.forward(x_sem));
    let (h_sem, mask) =
        dropout_forward(&sem_relu, cfg.dropout_p, mode == ForwardMode::Train, rng);
    let h_meta = relu(&params.meta_layer.forward(v_meta));
    let mut h_joint = h_sem.clone();
    h_joint.extend_from_slice(&h_meta);
    let h_fuse = relu(&params.fuse_layer.forward(&h_joint));
    let logit = params.out_head.forward(&h_fuse)[0];
    let score = sigmoid(logit);
    (RouterActivations { h_sem, h_meta, h_joint, h_fuse, score }, mask)
}

/// Analytic gradients of binary cross-entropy composed with the forward
/// pass. Dropped coordinates and dead ReLU regions receive zero gradient.
pub fn router_backward(
    params: &RouterParams,
    cfg: &RouterConfig,
    acts: &RouterActivations,
    x_sem: &[f64],
    v_meta: &[f64],
    dropout_mask: &DropoutMask,
    target: f64,
) -> RouterGrads {
    assert_eq!(acts.h_sem.len(), cfg.d_sem, "activations do not match config: h_sem");
    assert_eq!(acts.h_meta.len(), cfg.d_struct, "activations do not match config: h_meta");
    assert_eq!(acts.h_joint.len(), cfg.d_joint(), "activations do not match config: h_joint");
    assert_eq!(acts.h_fuse.len(), cfg.d_fuse, "activations do not match config: h_fuse");
    assert_eq!(dropout_mask.len(), cfg.d_sem, "dropout mask does not match d_sem");
    assert!((0.0..=1.0).contains(&target), "target {target} outside [0, 1]");

    let mut grads = RouterGrads::zeros(cfg);

    // d(BCE o sigmoid)/d(logit) collapses to (score - target).
    let delta_logit = acts.score - target;
    for (g, h) in grads.out_head.weights.iter_mut().zip(&acts.h_fuse) {
        *g = delta_logit * h;
    }
    grads.out_head.bias[0] = delta_logit;

    let dz_fuse: Vec<f64> = acts
        .h_fuse
        .iter()
        .enumerate()
        .map(|(j, &h)| {
            if h > 0.0 {
                delta_logit * params.out_head.weights[j]
            } else {
                0.0
            }
        })
        .collect();
    for (j, dz) in dz_fuse.iter().enumerate() {
        let row = &mut grads.fuse_layer.weights[j * cfg.d_joint()..(j + 1) * cfg.d_joint()];
        for (g, h) in row.iter_mut().zip(&acts.h_joint) {
            *g = dz * h;
        }
        grads.fuse_layer.bias[j] = *dz;
    }

    let dh_joint = params.fuse_layer.backward_input(&dz_fuse);
    let (dh_sem, dh_meta) = dh_joint.split_at(cfg.d_sem);

    // h_sem > 0 exactly when the coordinate was kept and its ReLU fired.
    let dz_sem: Vec<f64> = dh_sem
        .iter()
        .zip(&acts.h_sem)
        .zip(dropout_mask)
        .map(|((dh, &h), &m)| if h > 0.0 { dh * m } else { 0.0 })
        .collect();
    for (i, dz) in dz_sem.iter().enumerate() {
        let row = &mut grads.text_layer.weights[i * cfg.d_in..(i + 1) * cfg.d_in];
        for (g, x) in row.iter_mut().zip(x_sem) {
            *g = dz * x;
        }
        grads.text_layer.bias[i] = *dz;
    }

    let dz_meta: Vec<f64> = dh_meta
        .iter()
        .zip(&acts.h_meta)
        .map(|(dh, &h)| if h > 0.0 { *dh } else { 0.0 })
        .collect();
    for (i, dz) in dz_meta.iter().enumerate() {
        let row = &mut grads.meta_layer.weights[i * cfg.d_meta..(i + 1) * cfg.d_meta];
        for (g, v) in row.iter_mut().zip(v_meta) {
            *g = dz * v;
        }
        grads.meta_layer.bias[i] = *dz;
    }

    grads
}

/// Deterministic eval-mode score for frozen parameters.
pub fn predict_strong_probability(
    params: &RouterParams,
    cfg: &RouterConfig,
    x_sem: &[f64],
    v_meta: &[f64],
) -> f64 {
    let mut rng = crate::rng::stream(0, "eval-unused");
    let (acts, _) = router_forward(params, cfg, x_sem, v_meta, ForwardMode::Eval, &mut rng);
    acts.score
}

/// Routes Strong strictly above the threshold; ties go Weak.
pub fn route_decision(score: f64, threshold: f64) -> ModelTier {
    if score > threshold {
        ModelTier::Strong
    } else {
        ModelTier::Weak
    }
}
