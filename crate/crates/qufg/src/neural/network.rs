//! Two-layer quasi-framelet node classifier with hand-derived gradients.

use ndarray::Array2;

use crate::cheb::FastTransformPlan;
use crate::error::{Error, Result};
use crate::rng::Stream;

use super::conv::{
    conv_backward, conv_forward_cached, init_conv_params, Activation, ConvCache, ConvLayerParams,
    Variant,
};
use super::optim::{adam_step, AdamConfig, AdamState};

/// Seeded stream position for one training-mode forward pass. Dropout
/// draws are keyed by `(epoch, branch, node, unit)` so homogeneous models
/// (always branch 0) and multi-branch models share the same stream layout.
#[derive(Debug, Clone, Copy)]
pub struct DropoutKey {
    pub seed: u64,
    pub epoch: u64,
    pub branch: u64,
}

impl DropoutKey {
    pub fn new(seed: u64, epoch: u64) -> Self {
        DropoutKey {
            seed,
            epoch,
            branch: 0,
        }
    }
}

/// Inverted dropout on hidden activations. Returns the dropped signal and
/// the scaled keep mask needed by the backward pass.
pub(crate) fn apply_dropout(
    h: &Array2<f64>,
    rate: f64,
    key: &DropoutKey,
) -> (Array2<f64>, Array2<f64>) {
    if rate <= 0.0 {
        let ones = Array2::ones(h.dim());
        return (h.clone(), ones);
    }
    let stream = Stream::new(key.seed, "dropout");
    let scale = 1.0 / (1.0 - rate);
    let mask = Array2::from_shape_fn(h.dim(), |(i, j)| {
        if stream.uniform(&[key.epoch, key.branch, i as u64, j as u64]) >= rate {
            scale
        } else {
            0.0
        }
    });
    (h * &mask, mask)
}

/// Parameters of the two-layer classifier.
#[derive(Debug, Clone)]
pub struct NetworkParams {
    pub layer1: ConvLayerParams,
    pub layer2: ConvLayerParams,
    pub dropout_rate: f64,
    pub variant: Variant,
}

/// Gradient container mirroring [`NetworkParams`].
#[derive(Debug, Clone)]
pub struct NetworkGrads {
    pub layer1: ConvLayerParams,
    pub layer2: ConvLayerParams,
}

impl NetworkParams {
    pub fn tensor_sizes(&self) -> Vec<usize> {
        self.layer1
            .tensor_slices()
            .iter()
            .chain(self.layer2.tensor_slices().iter())
            .map(|s| s.len())
            .collect()
    }

    pub fn tensor_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.layer1.tensor_slices_mut();
        out.extend(self.layer2.tensor_slices_mut());
        out
    }
}

impl NetworkGrads {
    pub fn tensor_slices(&self) -> Vec<&[f64]> {
        let mut out = self.layer1.tensor_slices();
        out.extend(self.layer2.tensor_slices());
        out
    }
}

/// Seeded network initialisation. Layer tags match the single-branch
/// heterogeneous model so the two pipelines are interchangeable on one
/// graph.
#[allow(clippy::too_many_arguments)]
pub fn init_network(
    seed: u64,
    d_in: usize,
    hidden: usize,
    num_classes: usize,
    block_count: usize,
    num_nodes: usize,
    dropout_rate: f64,
    variant: Variant,
) -> NetworkParams {
    NetworkParams {
        layer1: init_conv_params(seed, "b0", d_in, hidden, block_count, num_nodes),
        layer2: init_conv_params(seed, "cls", hidden, num_classes, block_count, num_nodes),
        dropout_rate,
        variant,
    }
}

pub struct ForwardCache {
    conv1: ConvCache,
    conv2: ConvCache,
    dropout_mask: Array2<f64>,
}

/// Full forward pass: conv(ReLU) -> dropout (training only) -> conv
/// (identity) -> logits.
pub fn forward_cached(
    net: &NetworkParams,
    plan: &FastTransformPlan,
    x: &Array2<f64>,
    dropout: Option<&DropoutKey>,
) -> Result<(Array2<f64>, ForwardCache)> {
    let (h1, conv1) = conv_forward_cached(plan, &net.layer1, x, Activation::Relu, net.variant)?;
    let (h1d, dropout_mask) = match dropout {
        Some(key) => apply_dropout(&h1, net.dropout_rate, key),
        None => (h1.clone(), Array2::ones(h1.dim())),
    };
    let (logits, conv2) =
        conv_forward_cached(plan, &net.layer2, &h1d, Activation::Identity, net.variant)?;
    Ok((
        logits,
        ForwardCache {
            conv1,
            conv2,
            dropout_mask,
        },
    ))
}

/// Inference-style forward returning logits only.
pub fn forward(
    net: &NetworkParams,
    plan: &FastTransformPlan,
    x: &Array2<f64>,
    dropout: Option<&DropoutKey>,
) -> Result<Array2<f64>> {
    forward_cached(net, plan, x, dropout).map(|(logits, _)| logits)
}

/// Mean softmax cross-entropy over the masked nodes; returns the loss and
/// the gradient with respect to the logits.
pub(crate) fn cross_entropy(
    logits: &Array2<f64>,
    labels: &[usize],
    mask: &[usize],
) -> Result<(f64, Array2<f64>)> {
    if mask.is_empty() {
        return Err(Error::input("loss mask must not be empty"));
    }
    let classes = logits.ncols();
    let mut loss = 0.0;
    let mut d_logits = Array2::<f64>::zeros(logits.dim());
    let inv = 1.0 / mask.len() as f64;
    for &i in mask {
        let row = logits.row(i);
        let label = labels[i];
        if label >= classes {
            return Err(Error::input(format!(
                "label {label} out of range for {classes} classes"
            )));
        }
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = row.iter().map(|&z| (z - max).exp()).sum();
        loss += (max + sum_exp.ln() - row[label]) * inv;
        for c in 0..classes {
            let softmax = (row[c] - max).exp() / sum_exp;
            d_logits[[i, c]] = (softmax - if c == label { 1.0 } else { 0.0 }) * inv;
        }
    }
    Ok((loss, d_logits))
}

/// Loss plus hand-derived gradients for every parameter tensor. The L2
/// penalty applies to the feature weights of both layers.
pub fn loss_and_grads(
    net: &NetworkParams,
    plan: &FastTransformPlan,
    x: &Array2<f64>,
    labels: &[usize],
    train_mask: &[usize],
    weight_decay: f64,
    dropout: Option<&DropoutKey>,
) -> Result<(f64, NetworkGrads)> {
    let (logits, cache) = forward_cached(net, plan, x, dropout)?;
    let (mut loss, d_logits) = cross_entropy(&logits, labels, train_mask)?;

    let (mut g2, d_h1d) = conv_backward(plan, &net.layer2, &cache.conv2, &d_logits, net.variant)?;
    let d_h1 = &d_h1d * &cache.dropout_mask;
    let (mut g1, _) = conv_backward(plan, &net.layer1, &cache.conv1, &d_h1, net.variant)?;

    if weight_decay > 0.0 {
        for (g, p) in [(&mut g1, &net.layer1), (&mut g2, &net.layer2)] {
            loss += 0.5 * weight_decay * p.feature_weights.iter().map(|w| w * w).sum::<f64>();
            g.feature_weights
                .zip_mut_with(&p.feature_weights, |g, &w| *g += weight_decay * w);
        }
    }
    Ok((
        loss,
        NetworkGrads {
            layer1: g1,
            layer2: g2,
        },
    ))
}

/// Fraction of masked nodes whose argmax logit matches the label.
pub fn evaluate_accuracy(logits: &Array2<f64>, labels: &[usize], mask: &[usize]) -> f64 {
    if mask.is_empty() {
        return 0.0;
    }
    let mut hits = 0usize;
    for &i in mask {
        let row = logits.row(i);
        let mut best = 0usize;
        for c in 1..row.len() {
            if row[c] > row[best] {
                best = c;
            }
        }
        if best == labels[i] {
            hits += 1;
        }
    }
    hits as f64 / mask.len() as f64
}

/// Training hyperparameters.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub early_stop_patience: usize,
    pub hidden_units: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub dropout_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            weight_decay: 5e-4,
            epochs: 200,
            early_stop_patience: 30,
            hidden_units: 32,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            dropout_rate: 0.3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if self.learning_rate < 0.0 || self.weight_decay < 0.0 {
            return Err(Error::config("rates must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::config("dropout rate must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
        }
    }
}

/// Node features, labels, and the index sets driving training. The test
/// mask is not consulted here; evaluation happens after training.
#[derive(Debug, Clone, Copy)]
pub struct LabeledGraphData<'a> {
    pub features: &'a Array2<f64>,
    pub labels: &'a [usize],
    pub train_mask: &'a [usize],
    pub val_mask: &'a [usize],
}

#[derive(Debug, Clone, Copy)]
pub struct EpochRecord {
    pub train_loss: f64,
    pub val_accuracy: f64,
}

/// Full-batch training with Adam and early stopping on validation
/// accuracy: the best-validation parameters are restored at the end.
pub fn train(
    mut net: NetworkParams,
    plan: &FastTransformPlan,
    data: &LabeledGraphData,
    cfg: &TrainConfig,
) -> Result<(NetworkParams, Vec<EpochRecord>)> {
    cfg.validate()?;
    let mut state = AdamState::new(&net.tensor_sizes());
    let adam_cfg = cfg.adam();

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, NetworkParams)> = None;
    let mut since_best = 0usize;

    for epoch in 0..cfg.epochs {
        let key = DropoutKey::new(cfg.seed, epoch as u64);
        let (loss, grads) = loss_and_grads(
            &net,
            plan,
            data.features,
            data.labels,
            data.train_mask,
            cfg.weight_decay,
            Some(&key),
        )?;
        adam_step(
            &mut state,
            &mut net.tensor_slices_mut(),
            &grads.tensor_slices(),
            &adam_cfg,
        );

        let logits = forward(&net, plan, data.features, None)?;
        let val_accuracy = evaluate_accuracy(&logits, data.labels, data.val_mask);
        history.push(EpochRecord {
            train_loss: loss,
            val_accuracy,
        });

        if !data.val_mask.is_empty() {
            let improved = best.as_ref().is_none_or(|(acc, _)| val_accuracy > *acc);
            if improved {
                best = Some((val_accuracy, net.clone()));
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= cfg.early_stop_patience {
                    break;
                }
            }
        }
    }

    if let Some((_, snapshot)) = best {
        net = snapshot;
    }
    Ok((net, history))
}
