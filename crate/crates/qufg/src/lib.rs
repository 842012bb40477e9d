//! Quasi-framelet graph signal transforms and graph convolution networks.
//!
//! The crate is organised around the pipeline it implements:
//!
//! - [`graph`]: graphs, normalized Laplacians, and meta-path induced
//!   subgraphs of heterogeneous graphs.
//! - [`modulation`]: spectral-domain band families satisfying the
//!   partition-of-unity identity.
//! - [`spectral`]: the exact eigendecomposition-based transform and its
//!   framelet atoms.
//! - [`cheb`]: Chebyshev-approximated filters and the fast,
//!   eigendecomposition-free decomposition/reconstruction recursions.
//! - [`neural`]: the learnable spectral convolution, two-layer node
//!   classifier, hand-derived gradients, Adam, and the multi-meta-path
//!   heterogeneous variant.
//! - [`dataset`], [`noise`], [`metrics`], [`experiment`]: data loading,
//!   deterministic noise injection, evaluation metrics, and the
//!   experiment harness behind the CLI.
//! - [`rng`]: the counter-based deterministic random stream every seeded
//!   draw goes through.

pub mod cheb;
pub mod config;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod modulation;
pub mod neural;
pub mod noise;
pub mod rng;
pub mod sparse;
pub mod spectral;

pub use error::{Error, Result};
