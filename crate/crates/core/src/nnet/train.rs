use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::engine::{self, batch_loss_grads, Gradients, Weights};
use super::spec::NetSpec;
use super::tensor::Tensor;
use super::{init_params, NetError, ParamSet};
use crate::rng;

/// Momentum SGD hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Per-class loss weights (weighted mean cross-entropy); `None` weighs all samples equally.
    pub class_weights: Option<Vec<f64>>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 0.02, momentum: 0.9, batch_size: 16, epochs: 30, seed: 0, class_weights: None }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: &str| Err(NetError::InvalidConfig(m.into()));
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad("learning_rate must be finite and non-negative");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if let Some(w) = &self.class_weights {
            if w.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
                return bad("class weights must be positive");
            }
        }
        Ok(())
    }
}

/// Inputs `[N, C, H, W]` with one class label per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledData {
    pub inputs: Tensor,
    pub labels: Vec<usize>,
}

impl LabeledData {
    pub fn new(inputs: Tensor, labels: Vec<usize>) -> Result<Self, NetError> {
        if labels.is_empty() {
            return Err(NetError::EmptyData);
        }
        if inputs.shape().len() != 4 || inputs.batch_len() != labels.len() {
            return Err(NetError::LabelCount { labels: labels.len(), samples: inputs.batch_len() });
        }
        Ok(Self { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean training loss over the epoch's mini-batches.
    pub train_loss: f64,
    /// Fraction of training samples classified correctly before each step.
    pub train_accuracy: f64,
    pub val_accuracy: Option<f64>,
}

/// Trains from `init_params(spec, cfg.seed)`.
pub fn train(
    spec: &NetSpec,
    data: &LabeledData,
    val: Option<&LabeledData>,
    cfg: &TrainConfig,
) -> Result<(ParamSet, Vec<EpochMetrics>), NetError> {
    cfg.validate()?;
    let plan = spec.plan()?;
    if data.is_empty() {
        return Err(NetError::EmptyData);
    }
    let n = engine::check_batch(&plan, spec, &data.inputs)?;
    engine::check_labels(&data.labels, spec.classes, n)?;
    if let Some(v) = val {
        engine::check_batch(&plan, spec, &v.inputs)?;
        engine::check_labels(&v.labels, spec.classes, v.len())?;
    }
    if let Some(w) = &cfg.class_weights {
        if w.len() != spec.classes {
            return Err(NetError::InvalidConfig(format!("{} class weights for {} classes", w.len(), spec.classes)));
        }
    }

    let mut params = init_params(spec, cfg.seed)?;
    let mut velocity = Gradients::zeros_like(&Weights::from_params(&params));
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffle_rng = rng::sub_rng(cfg.seed, "shuffle", 0);
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let samples: Vec<&[f32]> = chunk.iter().map(|&i| data.inputs.sample(i)).collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| data.labels[i]).collect();
            let weights = Weights::from_params(&params);
            let (loss, hits, grads) = batch_loss_grads(&plan, &weights, &samples, &labels, cfg.class_weights.as_deref());
            loss_sum += loss * chunk.len() as f64;
            correct += hits;
            apply_update(&mut params, &mut velocity, &grads, cfg);
        }
        let val_accuracy = val.map(|v| accuracy(spec, &params, v)).transpose()?;
        history.push(EpochMetrics {
            epoch: epoch + 1,
            train_loss: loss_sum / n as f64,
            train_accuracy: correct as f64 / n as f64,
            val_accuracy,
        });
    }
    Ok((params, history))
}

/// `v ← μ·v − η·g; θ ← θ + v`, with `θ` rounded back to `f32`.
fn apply_update(params: &mut ParamSet, velocity: &mut Gradients, grads: &Gradients, cfg: &TrainConfig) {
    if cfg.learning_rate == 0.0 {
        return;
    }
    for ((layer, (vw, vb)), (gw, gb)) in params.layers.iter_mut().zip(&mut velocity.layers).zip(&grads.layers) {
        for (t, (v, g)) in [(layer.weight.data_mut(), (vw, gw)), (layer.bias.data_mut(), (vb, gb))] {
            for ((p, v), g) in t.iter_mut().zip(v.iter_mut()).zip(g) {
                *v = cfg.momentum * *v - cfg.learning_rate * g;
                *p = (f64::from(*p) + *v) as f32;
            }
        }
    }
}

/// Argmax class of every sample.
pub fn predict_classes(spec: &NetSpec, params: &ParamSet, inputs: &Tensor) -> Result<Vec<usize>, NetError> {
    Ok(engine::logits_f64(spec, params, inputs)?.iter().map(|l| engine::argmax(l)).collect())
}

pub fn accuracy(spec: &NetSpec, params: &ParamSet, data: &LabeledData) -> Result<f64, NetError> {
    let pred = predict_classes(spec, params, &data.inputs)?;
    let hits = pred.iter().zip(&data.labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / data.len() as f64)
}
