//! Multi-meta-path variant: one convolution branch per meta-path subgraph,
//! a shared classifier convolution, and a semantic merge of the per-path
//! logits.
//!
//! With a single branch and mean merging this reduces exactly to the
//! homogeneous two-layer network on that subgraph, draw stream included.

use ndarray::{Array1, Array2};

use crate::cheb::FastTransformPlan;
use crate::error::{Error, Result};

use super::conv::{
    conv_backward, conv_forward_cached, init_conv_params, Activation, ConvCache, ConvLayerParams,
    Variant,
};
use super::network::{cross_entropy, DropoutKey, EpochRecord, LabeledGraphData, TrainConfig};
use super::optim::{adam_step, AdamState};

/// How per-path outputs are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MergeMode {
    /// Plain average over branches.
    #[default]
    Mean,
    /// Convex combination with learnable weights, softmax of free scalars.
    Weighted,
}

impl MergeMode {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "mean" => Ok(MergeMode::Mean),
            "weighted" => Ok(MergeMode::Weighted),
            other => Err(Error::config(format!(
                "unknown merge mode `{other}` (expected mean or weighted)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HeteroModelParams {
    /// One first-layer convolution per meta-path.
    pub branches: Vec<ConvLayerParams>,
    /// Classifier convolution shared across branches.
    pub classifier: ConvLayerParams,
    pub merge: MergeMode,
    /// Free merge scalars, softmaxed when `merge` is `Weighted`.
    pub merge_logits: Array1<f64>,
    pub dropout_rate: f64,
    pub variant: Variant,
}

#[derive(Debug, Clone)]
pub struct HeteroGrads {
    pub branches: Vec<ConvLayerParams>,
    pub classifier: ConvLayerParams,
    pub merge_logits: Array1<f64>,
}

impl HeteroModelParams {
    pub fn num_branches(&self) -> usize {
        self.branches.len()
    }

    /// Actual combination weights used by the forward pass.
    pub fn merge_weights(&self) -> Vec<f64> {
        let p = self.num_branches();
        match self.merge {
            MergeMode::Mean => vec![1.0 / p as f64; p],
            MergeMode::Weighted => {
                let max = self
                    .merge_logits
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = self.merge_logits.iter().map(|&l| (l - max).exp()).collect();
                let total: f64 = exps.iter().sum();
                exps.into_iter().map(|e| e / total).collect()
            }
        }
    }

    pub fn tensor_sizes(&self) -> Vec<usize> {
        let mut sizes: Vec<usize> = self
            .branches
            .iter()
            .flat_map(|b| b.tensor_slices().into_iter().map(|s| s.len()))
            .collect();
        sizes.extend(self.classifier.tensor_slices().iter().map(|s| s.len()));
        if self.merge == MergeMode::Weighted {
            sizes.push(self.merge_logits.len());
        }
        sizes
    }

    pub fn tensor_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let merge_weighted = self.merge == MergeMode::Weighted;
        let mut out = Vec::new();
        for b in &mut self.branches {
            out.extend(b.tensor_slices_mut());
        }
        out.extend(self.classifier.tensor_slices_mut());
        if merge_weighted {
            out.push(self.merge_logits.as_slice_mut().expect("contiguous"));
        }
        out
    }
}

impl HeteroGrads {
    pub fn tensor_slices(&self, merge: MergeMode) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for b in &self.branches {
            out.extend(b.tensor_slices());
        }
        out.extend(self.classifier.tensor_slices());
        if merge == MergeMode::Weighted {
            out.push(self.merge_logits.as_slice().expect("contiguous"));
        }
        out
    }
}

/// Seeded initialisation; branch `p` draws from stream tag `b{p}` and the
/// classifier from `cls`, matching [`super::init_network`] at one branch.
#[allow(clippy::too_many_arguments)]
pub fn init_hetero(
    seed: u64,
    num_branches: usize,
    d_in: usize,
    hidden: usize,
    num_classes: usize,
    block_count: usize,
    num_nodes: usize,
    dropout_rate: f64,
    variant: Variant,
    merge: MergeMode,
) -> Result<HeteroModelParams> {
    if num_branches == 0 {
        return Err(Error::config("hetero model needs at least one meta-path"));
    }
    let branches = (0..num_branches)
        .map(|p| init_conv_params(seed, &format!("b{p}"), d_in, hidden, block_count, num_nodes))
        .collect();
    Ok(HeteroModelParams {
        branches,
        classifier: init_conv_params(seed, "cls", hidden, num_classes, block_count, num_nodes),
        merge,
        merge_logits: Array1::zeros(num_branches),
        dropout_rate,
        variant,
    })
}

pub struct HeteroCache {
    branch_convs: Vec<ConvCache>,
    classifier_convs: Vec<ConvCache>,
    dropout_masks: Vec<Array2<f64>>,
    branch_logits: Vec<Array2<f64>>,
}

fn check_plans(hm: &HeteroModelParams, plans: &[FastTransformPlan]) -> Result<()> {
    if plans.is_empty() || plans.len() != hm.num_branches() {
        return Err(Error::config(format!(
            "model has {} branches but {} plans were supplied",
            hm.num_branches(),
            plans.len()
        )));
    }
    Ok(())
}

/// Forward pass over all branches, merged into one logit matrix. All
/// branches consume the same target-type features.
pub fn hetero_forward_cached(
    hm: &HeteroModelParams,
    plans: &[FastTransformPlan],
    x: &Array2<f64>,
    dropout: Option<&DropoutKey>,
) -> Result<(Array2<f64>, HeteroCache)> {
    check_plans(hm, plans)?;
    let weights = hm.merge_weights();
    let mut cache = HeteroCache {
        branch_convs: Vec::new(),
        classifier_convs: Vec::new(),
        dropout_masks: Vec::new(),
        branch_logits: Vec::new(),
    };
    let mut merged: Option<Array2<f64>> = None;
    for (p, plan) in plans.iter().enumerate() {
        let (h, conv1) =
            conv_forward_cached(plan, &hm.branches[p], x, Activation::Relu, hm.variant)?;
        let (hd, mask) = match dropout {
            Some(key) => {
                let branch_key = DropoutKey {
                    seed: key.seed,
                    epoch: key.epoch,
                    branch: p as u64,
                };
                super::network::apply_dropout(&h, hm.dropout_rate, &branch_key)
            }
            None => (h.clone(), Array2::ones(h.dim())),
        };
        let (logits, conv2) =
            conv_forward_cached(plan, &hm.classifier, &hd, Activation::Identity, hm.variant)?;
        let contribution = &logits * weights[p];
        merged = Some(match merged {
            None => contribution,
            Some(acc) => acc + contribution,
        });
        cache.branch_convs.push(conv1);
        cache.classifier_convs.push(conv2);
        cache.dropout_masks.push(mask);
        cache.branch_logits.push(logits);
    }
    Ok((merged.expect("at least one branch"), cache))
}

pub fn hetero_forward(
    hm: &HeteroModelParams,
    plans: &[FastTransformPlan],
    x: &Array2<f64>,
    dropout: Option<&DropoutKey>,
) -> Result<Array2<f64>> {
    hetero_forward_cached(hm, plans, x, dropout).map(|(logits, _)| logits)
}

/// Loss and gradients for the heterogeneous model. Classifier gradients
/// accumulate over branches since the weights are shared.
pub fn hetero_loss_and_grads(
    hm: &HeteroModelParams,
    plans: &[FastTransformPlan],
    x: &Array2<f64>,
    labels: &[usize],
    train_mask: &[usize],
    weight_decay: f64,
    dropout: Option<&DropoutKey>,
) -> Result<(f64, HeteroGrads)> {
    let (merged, cache) = hetero_forward_cached(hm, plans, x, dropout)?;
    let (mut loss, d_merged) = cross_entropy(&merged, labels, train_mask)?;

    let weights = hm.merge_weights();
    let mut branch_grads = Vec::with_capacity(hm.num_branches());
    let mut classifier_grads = hm.classifier.zeros_like();
    let mut d_weights = vec![0.0; hm.num_branches()];

    for (p, plan) in plans.iter().enumerate() {
        d_weights[p] = (&d_merged * &cache.branch_logits[p]).sum();
        let d_logits = &d_merged * weights[p];
        let (g_cls, d_hd) = conv_backward(
            plan,
            &hm.classifier,
            &cache.classifier_convs[p],
            &d_logits,
            hm.variant,
        )?;
        accumulate(&mut classifier_grads, &g_cls);
        let d_h = &d_hd * &cache.dropout_masks[p];
        let (g_branch, _) = conv_backward(
            plan,
            &hm.branches[p],
            &cache.branch_convs[p],
            &d_h,
            hm.variant,
        )?;
        branch_grads.push(g_branch);
    }

    // softmax jacobian for the merge weights
    let mut merge_logit_grads = Array1::zeros(hm.num_branches());
    if hm.merge == MergeMode::Weighted {
        let dot: f64 = weights.iter().zip(&d_weights).map(|(w, d)| w * d).sum();
        for p in 0..hm.num_branches() {
            merge_logit_grads[p] = weights[p] * (d_weights[p] - dot);
        }
    }

    if weight_decay > 0.0 {
        for (g, p) in branch_grads.iter_mut().zip(&hm.branches) {
            loss += 0.5 * weight_decay * p.feature_weights.iter().map(|w| w * w).sum::<f64>();
            g.feature_weights
                .zip_mut_with(&p.feature_weights, |g, &w| *g += weight_decay * w);
        }
        loss += 0.5
            * weight_decay
            * hm.classifier
                .feature_weights
                .iter()
                .map(|w| w * w)
                .sum::<f64>();
        classifier_grads
            .feature_weights
            .zip_mut_with(&hm.classifier.feature_weights, |g, &w| {
                *g += weight_decay * w
            });
    }

    Ok((
        loss,
        HeteroGrads {
            branches: branch_grads,
            classifier: classifier_grads,
            merge_logits: merge_logit_grads,
        },
    ))
}

fn accumulate(into: &mut ConvLayerParams, from: &ConvLayerParams) {
    into.feature_weights += &from.feature_weights;
    into.spectral_filter += &from.spectral_filter;
    into.shrink_raw += &from.shrink_raw;
}

/// Training loop mirroring the homogeneous one.
pub fn hetero_train(
    mut hm: HeteroModelParams,
    plans: &[FastTransformPlan],
    data: &LabeledGraphData,
    cfg: &TrainConfig,
) -> Result<(HeteroModelParams, Vec<EpochRecord>)> {
    cfg.validate()?;
    check_plans(&hm, plans)?;
    let mut state = AdamState::new(&hm.tensor_sizes());
    let adam_cfg = cfg.adam();

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, HeteroModelParams)> = None;
    let mut since_best = 0usize;

    for epoch in 0..cfg.epochs {
        let key = DropoutKey::new(cfg.seed, epoch as u64);
        let (loss, grads) = hetero_loss_and_grads(
            &hm,
            plans,
            data.features,
            data.labels,
            data.train_mask,
            cfg.weight_decay,
            Some(&key),
        )?;
        let merge = hm.merge;
        adam_step(
            &mut state,
            &mut hm.tensor_slices_mut(),
            &grads.tensor_slices(merge),
            &adam_cfg,
        );

        let logits = hetero_forward(&hm, plans, data.features, None)?;
        let val_accuracy = super::network::evaluate_accuracy(&logits, data.labels, data.val_mask);
        history.push(EpochRecord {
            train_loss: loss,
            val_accuracy,
        });

        if !data.val_mask.is_empty() {
            let improved = best.as_ref().is_none_or(|(acc, _)| val_accuracy > *acc);
            if improved {
                best = Some((val_accuracy, hm.clone()));
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
        hm = snapshot;
    }
    Ok((hm, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cheb::CutoffMode;
    use crate::graph::{Graph, NormalizedLaplacian};
    use crate::modulation::ModulationFamily;
    use crate::neural::network::{forward, init_network};
    use crate::rng::Stream;

    fn small_plan(seed: u64) -> FastTransformPlan {
        let s = Stream::new(seed, "hetero-test-graph");
        let n = 7;
        let mut edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        for i in 0..n {
            for j in (i + 2)..n {
                if s.uniform(&[i as u64, j as u64]) < 0.3 {
                    edges.push((i, j));
                }
            }
        }
        let g = Graph::build(n, &edges).unwrap();
        FastTransformPlan::new(
            NormalizedLaplacian::new(&g),
            ModulationFamily::entropy(0.75).unwrap(),
            1,
            2.0,
            3,
            CutoffMode::None,
        )
        .unwrap()
    }

    fn signal(seed: u64) -> Array2<f64> {
        let s = Stream::new(seed, "hetero-test-signal");
        Array2::from_shape_fn((7, 3), |(i, j)| s.normal(&[i as u64, j as u64]))
    }

    #[test]
    fn single_branch_equals_homogeneous_forward() {
        let plan = small_plan(1);
        let net = init_network(5, 3, 4, 2, plan.block_count(), 7, 0.4, Variant::ReluFilter);
        let hm = init_hetero(
            5,
            1,
            3,
            4,
            2,
            plan.block_count(),
            7,
            0.4,
            Variant::ReluFilter,
            MergeMode::Mean,
        )
        .unwrap();
        // identical seeds and stream tags mean identical tensors
        assert_eq!(net.layer1.feature_weights, hm.branches[0].feature_weights);
        assert_eq!(net.layer2.feature_weights, hm.classifier.feature_weights);

        let x = signal(2);
        let key = DropoutKey::new(11, 4);
        let homo = forward(&net, &plan, &x, Some(&key)).unwrap();
        let het = hetero_forward(&hm, std::slice::from_ref(&plan), &x, Some(&key)).unwrap();
        assert_eq!(homo, het, "pipelines must agree bit-for-bit");
    }

    #[test]
    fn identical_branches_match_single_branch_output() {
        let plan = small_plan(3);
        let plans = vec![plan.clone(), plan.clone()];
        let single = init_hetero(
            7,
            1,
            3,
            4,
            2,
            plan.block_count(),
            7,
            0.0,
            Variant::ReluFilter,
            MergeMode::Mean,
        )
        .unwrap();
        let mut double = init_hetero(
            7,
            2,
            3,
            4,
            2,
            plan.block_count(),
            7,
            0.0,
            Variant::ReluFilter,
            MergeMode::Mean,
        )
        .unwrap();
        double.branches[1] = double.branches[0].clone();
        // align branch 0 tensors with the single-branch model
        double.branches[0] = single.branches[0].clone();
        double.branches[1] = single.branches[0].clone();
        double.classifier = single.classifier.clone();

        let x = signal(4);
        let one = hetero_forward(&single, &plans[..1], &x, None).unwrap();
        let two = hetero_forward(&double, &plans, &x, None).unwrap();
        let dev = (&one - &two).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(dev <= 1e-12);
    }

    #[test]
    fn saturated_merge_weights_select_one_branch() {
        let plan_a = small_plan(5);
        let plan_b = small_plan(6);
        let plans = vec![plan_a.clone(), plan_b];
        let mut hm = init_hetero(
            9,
            2,
            3,
            4,
            2,
            plan_a.block_count(),
            7,
            0.0,
            Variant::ReluFilter,
            MergeMode::Weighted,
        )
        .unwrap();
        // saturate the softmax: weights become exactly (1, 0) in floats
        hm.merge_logits = ndarray::array![800.0, -800.0];
        assert_eq!(hm.merge_weights(), vec![1.0, 0.0]);

        let x = signal(7);
        let merged = hetero_forward(&hm, &plans, &x, None).unwrap();
        let solo = HeteroModelParams {
            branches: vec![hm.branches[0].clone()],
            classifier: hm.classifier.clone(),
            merge: MergeMode::Mean,
            merge_logits: Array1::zeros(1),
            dropout_rate: 0.0,
            variant: Variant::ReluFilter,
        };
        let branch1 = hetero_forward(&solo, &plans[..1], &x, None).unwrap();
        assert_eq!(merged, branch1);
    }

    #[test]
    fn zero_metapaths_is_a_config_error() {
        assert!(init_hetero(
            1,
            0,
            3,
            4,
            2,
            5,
            7,
            0.0,
            Variant::ReluFilter,
            MergeMode::Mean
        )
        .is_err());
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn hetero_gradients_match_finite_differences() {
        let plans = vec![small_plan(11), small_plan(12)];
        let labels = vec![0usize, 1, 0, 1, 0, 1, 0];
        let mask = vec![0usize, 1, 2, 3, 4];
        let x = signal(13);
        for (variant, merge) in [
            (Variant::ReluFilter, MergeMode::Weighted),
            (Variant::Shrinkage, MergeMode::Mean),
        ] {
            let mut hm = init_hetero(
                21,
                2,
                3,
                4,
                2,
                plans[0].block_count(),
                7,
                0.0,
                variant,
                merge,
            )
            .unwrap();
            hm.merge_logits = ndarray::array![0.4, -0.2];
            let (_, grads) =
                hetero_loss_and_grads(&hm, &plans, &x, &labels, &mask, 1e-3, None).unwrap();
            let analytic: Vec<Vec<f64>> = grads
                .tensor_slices(merge)
                .iter()
                .map(|s| s.to_vec())
                .collect();

            let step = 1e-5;
            let mut worst = 0.0f64;
            for t in 0..analytic.len() {
                for i in 0..analytic[t].len() {
                    let mut eval = |delta: f64| {
                        hm.tensor_slices_mut()[t][i] += delta;
                        let (loss, _) =
                            hetero_loss_and_grads(&hm, &plans, &x, &labels, &mask, 1e-3, None)
                                .unwrap();
                        hm.tensor_slices_mut()[t][i] -= delta;
                        loss
                    };
                    let fd = (eval(step) - eval(-step)) / (2.0 * step);
                    let a = analytic[t][i];
                    worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(1e-6));
                }
            }
            assert!(worst <= 1e-4, "{variant:?}/{merge:?}: rel err {worst:.3e}");
        }
    }
}
