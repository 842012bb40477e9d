//! Learnable quasi-framelet convolution and node-classification networks.
//!
//! The convolution projects node features, decomposes them with the fast
//! transform, rescales every coefficient block with a learnable diagonal
//! (optionally followed by soft thresholding), applies the cutoff mask and
//! reconstructs. Because decomposition and reconstruction are exact
//! adjoints of each other, the backward pass reuses them directly and all
//! gradients are hand-derived.

mod conv;
mod hetero;
mod network;
mod optim;

pub use conv::{
    conv_backward, conv_forward, conv_forward_cached, init_conv_params, soft_threshold, Activation,
    ConvCache, ConvLayerParams, Variant,
};
pub use hetero::{
    hetero_forward, hetero_forward_cached, hetero_loss_and_grads, hetero_train, init_hetero,
    HeteroGrads, HeteroModelParams, MergeMode,
};
pub use network::{
    evaluate_accuracy, forward, forward_cached, init_network, loss_and_grads, train, DropoutKey,
    EpochRecord, LabeledGraphData, NetworkGrads, NetworkParams, TrainConfig,
};
pub use optim::{adam_step, AdamConfig, AdamState};
