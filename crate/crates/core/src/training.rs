//! Two-stage router training: supervised pretraining on the tiered seed
//! dataset, then conservative fine-tuning on relabeled trajectories with
//! scheduled learning-rate decay and optional replay against forgetting.

use std::collections::BTreeMap;

use rand::seq::index::sample as index_sample;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::LAYER_NAMES;
use crate::coldstart::TrainingSample;
use crate::error::{Error, Result};
use crate::nn::{adam_step, bce_loss, AdamState, SchedulerConfig};
use crate::rng::{stream, substream};
use crate::router::{
    route_decision, router_backward, router_forward, ForwardMode, RouterConfig, RouterGrads,
    RouterParams,
};
use crate::trajectory::RelabeledSample;

/// Hyperparameters for both training stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub pretrain_epochs: u32,
    pub pretrain_lr: f64,
    pub finetune_epochs: u32,
    pub finetune_lr: f64,
    pub decay_factor: f64,
    pub decay_every: u32,
    pub batch_size: usize,
    /// Fraction of the pretraining set replayed per fine-tuning epoch.
    /// Zero disables replay.
    pub replay_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            pretrain_epochs: 200,
            pretrain_lr: 1e-3,
            finetune_epochs: 200,
            finetune_lr: 1e-4,
            decay_factor: 0.5,
            decay_every: 50,
            batch_size: 32,
            replay_fraction: 0.25,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pretrain_epochs == 0 || self.finetune_epochs == 0 {
            return Err(Error::Config("training: epoch counts must be at least 1".into()));
        }
        let lr_bad = |lr: f64| lr.is_nan() || lr <= 0.0;
        if lr_bad(self.pretrain_lr) || lr_bad(self.finetune_lr) {
            return Err(Error::Config(format!(
                "training: learning rates must be positive (pretrain {}, finetune {})",
                self.pretrain_lr, self.finetune_lr
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("training: batch_size must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.replay_fraction) {
            return Err(Error::Config(format!(
                "training: replay_fraction {} outside [0, 1]",
                self.replay_fraction
            )));
        }
        SchedulerConfig::new(self.finetune_lr, self.decay_factor, self.decay_every)?;
        Ok(())
    }
}

/// What a training stage produced, beyond the parameters themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training-mode loss per epoch.
    pub loss: Vec<f64>,
    /// Thresholded accuracy on the stage's own training set, at 0.5.
    pub final_accuracy: f64,
    /// Filled in by whoever persists the checkpoint.
    pub checkpoint_path: Option<String>,
    /// Learning rate actually used at each epoch.
    pub lr_trace: Vec<f64>,
}

/// Thresholded classification metrics plus calibration loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub mean_bce: f64,
}

fn fresh_adam_states(params: &RouterParams) -> BTreeMap<String, AdamState> {
    let mut states = BTreeMap::new();
    for (name, layer) in [
        (LAYER_NAMES[0], &params.text_layer),
        (LAYER_NAMES[1], &params.meta_layer),
        (LAYER_NAMES[2], &params.fuse_layer),
        (LAYER_NAMES[3], &params.out_head),
    ] {
        states.insert(format!("{name}.weights"), AdamState::new(layer.weights.len()));
        states.insert(format!("{name}.bias"), AdamState::new(layer.bias.len()));
    }
    states
}

fn apply_grads(
    params: &mut RouterParams,
    grads: &RouterGrads,
    states: &mut BTreeMap<String, AdamState>,
    lr: f64,
) -> Result<()> {
    for (name, layer, grad) in [
        (LAYER_NAMES[0], &mut params.text_layer, &grads.text_layer),
        (LAYER_NAMES[1], &mut params.meta_layer, &grads.meta_layer),
        (LAYER_NAMES[2], &mut params.fuse_layer, &grads.fuse_layer),
        (LAYER_NAMES[3], &mut params.out_head, &grads.out_head),
    ] {
        let weights_key = format!("{name}.weights");
        let state = states.get_mut(&weights_key).expect("adam state exists for every tensor");
        adam_step(&mut layer.weights, &grad.weights, state, lr, &weights_key)?;
        let bias_key = format!("{name}.bias");
        let state = states.get_mut(&bias_key).expect("adam state exists for every tensor");
        adam_step(&mut layer.bias, &grad.bias, state, lr, &bias_key)?;
    }
    Ok(())
}

fn require_embedding<'a>(sample: &'a TrainingSample, d_in: usize, what: &str) -> Result<&'a [f64]> {
    let x_sem = sample.x_sem.as_deref().ok_or_else(|| {
        Error::Config(format!("{what}: sample {:?} has no embedding; re-embed the dataset", sample.text))
    })?;
    if x_sem.len() != d_in {
        return Err(Error::Config(format!(
            "{what}: sample embedding length {} does not match d_in {d_in}",
            x_sem.len()
        )));
    }
    Ok(x_sem)
}

/// One pass over `data` in `order`: batched gradient averaging, one Adam
/// step per batch. Returns the mean training-mode loss.
#[allow(clippy::too_many_arguments)]
fn train_epoch(
    params: &mut RouterParams,
    states: &mut BTreeMap<String, AdamState>,
    router_cfg: &RouterConfig,
    data: &[&TrainingSample],
    order: &[usize],
    lr: f64,
    batch_size: usize,
    dropout_rng: &mut ChaCha8Rng,
    what: &str,
) -> Result<f64> {
    let mut loss_sum = 0.0;
    for batch in order.chunks(batch_size) {
        let mut batch_grads = RouterGrads::zeros(router_cfg);
        for &idx in batch {
            let sample = data[idx];
            let x_sem = require_embedding(sample, router_cfg.d_in, what)?;
            let v_meta = sample.v_meta.as_slice();
            let (acts, mask) = router_forward(
                params,
                router_cfg,
                x_sem,
                v_meta,
                ForwardMode::Train,
                dropout_rng,
            );
            loss_sum += bce_loss(acts.score, sample.label);
            let grads =
                router_backward(params, router_cfg, &acts, x_sem, v_meta, &mask, sample.label);
            batch_grads.add(&grads);
        }
        batch_grads.scale(1.0 / batch.len() as f64);
        apply_grads(params, &batch_grads, states, lr)?;
    }
    Ok(loss_sum / data.len() as f64)
}

fn abort_for_epoch(err: Error, epoch: u32) -> Error {
    let detail = match err {
        Error::Training(msg) => msg,
        other => return other,
    };
    let last_good = if epoch == 0 {
        "no finite epoch preceded it".to_string()
    } else {
        format!("parameters from epoch {} were the last finite state", epoch - 1)
    };
    Error::Training(format!("epoch {epoch}: {detail}; training aborted; {last_good}"))
}

fn non_finite_loss(epoch: u32, loss: f64) -> Error {
    abort_for_epoch(Error::Training(format!("mean loss {loss} is not finite")), epoch)
}

/// Stage-1 supervised pretraining: constant learning rate, dropout
/// active, mini-batches reshuffled every epoch.
///
/// Dataset balance (all tiers present) is enforced where the dataset is
/// built; here any non-empty embedded dataset trains.
pub fn pretrain(
    dataset: &[TrainingSample],
    router_cfg: &RouterConfig,
    cfg: &TrainConfig,
) -> Result<(RouterParams, TrainReport)> {
    cfg.validate()?;
    router_cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Config("pretraining dataset is empty".into()));
    }
    let data: Vec<&TrainingSample> = dataset.iter().collect();
    let mut params = RouterParams::init(router_cfg, &mut stream(cfg.seed, "init"));
    let mut states = fresh_adam_states(&params);
    let mut loss_trace = Vec::with_capacity(cfg.pretrain_epochs as usize);
    for epoch in 0..cfg.pretrain_epochs {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut substream(cfg.seed, "pretrain-shuffle", epoch as u64));
        let mut dropout_rng = substream(cfg.seed, "pretrain-dropout", epoch as u64);
        let loss = train_epoch(
            &mut params,
            &mut states,
            router_cfg,
            &data,
            &order,
            cfg.pretrain_lr,
            cfg.batch_size,
            &mut dropout_rng,
            "pretrain",
        )
        .map_err(|err| abort_for_epoch(err, epoch))?;
        if !loss.is_finite() {
            return Err(non_finite_loss(epoch, loss));
        }
        loss_trace.push(loss);
    }
    let final_accuracy =
        evaluate_router(&params, router_cfg, dataset, router_cfg.threshold).accuracy;
    let report = TrainReport {
        loss: loss_trace,
        final_accuracy,
        checkpoint_path: None,
        lr_trace: vec![cfg.pretrain_lr; cfg.pretrain_epochs as usize],
    };
    Ok((params, report))
}

/// Stage-3 fine-tuning on relabeled trajectories: stepped learning-rate
/// decay, plus a fresh replay draw from the pretraining set each epoch.
/// The input parameters are left untouched; the tuned copy is returned.
pub fn finetune(
    params: &RouterParams,
    relabeled: &[RelabeledSample],
    replay_pool: &[TrainingSample],
    router_cfg: &RouterConfig,
    cfg: &TrainConfig,
) -> Result<(RouterParams, TrainReport)> {
    cfg.validate()?;
    router_cfg.validate()?;
    params.validate(router_cfg)?;
    if relabeled.is_empty() {
        return Err(Error::Config("fine-tuning requires a non-empty relabeled set".into()));
    }
    let scheduler = SchedulerConfig::new(cfg.finetune_lr, cfg.decay_factor, cfg.decay_every)?;
    let replay_count = (cfg.replay_fraction * replay_pool.len() as f64).ceil() as usize;

    let mut tuned = params.clone();
    let mut states = fresh_adam_states(&tuned);
    let mut loss_trace = Vec::with_capacity(cfg.finetune_epochs as usize);
    let mut lr_trace = Vec::with_capacity(cfg.finetune_epochs as usize);
    for epoch in 0..cfg.finetune_epochs {
        let mut data: Vec<&TrainingSample> = relabeled.iter().map(|r| &r.sample).collect();
        if replay_count > 0 {
            let mut replay_rng = substream(cfg.seed, "finetune-replay", epoch as u64);
            for idx in index_sample(&mut replay_rng, replay_pool.len(), replay_count) {
                data.push(&replay_pool[idx]);
            }
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut substream(cfg.seed, "finetune-shuffle", epoch as u64));
        let mut dropout_rng = substream(cfg.seed, "finetune-dropout", epoch as u64);
        let lr = scheduler.lr_at(epoch);
        let loss = train_epoch(
            &mut tuned,
            &mut states,
            router_cfg,
            &data,
            &order,
            lr,
            cfg.batch_size,
            &mut dropout_rng,
            "finetune",
        )
        .map_err(|err| abort_for_epoch(err, epoch))?;
        if !loss.is_finite() {
            return Err(non_finite_loss(epoch, loss));
        }
        loss_trace.push(loss);
        lr_trace.push(lr);
    }
    let tuned_view: Vec<TrainingSample> = relabeled.iter().map(|r| r.sample.clone()).collect();
    let final_accuracy =
        evaluate_router(&tuned, router_cfg, &tuned_view, router_cfg.threshold).accuracy;
    let report = TrainReport {
        loss: loss_trace,
        final_accuracy,
        checkpoint_path: None,
        lr_trace,
    };
    Ok((tuned, report))
}

/// Thresholded metrics over a labeled dataset. Labels at or above 0.5
/// count as class Strong; predictions are Strong strictly above the
/// threshold. Degenerate 0/0 ratios evaluate to 0.
pub fn evaluate_router(
    params: &RouterParams,
    router_cfg: &RouterConfig,
    dataset: &[TrainingSample],
    threshold: f64,
) -> EvalMetrics {
    assert!(!dataset.is_empty(), "evaluation dataset is empty");
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut tn = 0usize;
    let mut fn_ = 0usize;
    let mut bce_sum = 0.0;
    for sample in dataset {
        let x_sem = sample
            .x_sem
            .as_deref()
            .expect("evaluation sample has no embedding; re-embed the dataset");
        let score = crate::router::predict_strong_probability(
            params,
            router_cfg,
            x_sem,
            sample.v_meta.as_slice(),
        );
        bce_sum += bce_loss(score, sample.label);
        let actual_strong = sample.label >= 0.5;
        let predicted_strong =
            route_decision(score, threshold) == crate::router::ModelTier::Strong;
        match (actual_strong, predicted_strong) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
            (true, false) => fn_ += 1,
        }
    }
    let n = dataset.len() as f64;
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    EvalMetrics {
        accuracy: (tp + tn) as f64 / n,
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        mean_bce: bce_sum / n,
    }
}
