//! Deterministic feature-noise injection.
//!
//! Every injector is a pure function of `(input, spec)`: draws are keyed
//! by `(seed, purpose, row, col)` through [`crate::rng::Stream`], so the
//! same spec always produces bit-identical output and never mutates its
//! input.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::spectral::EigenSystem;

/// How binary corruption picks its targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BinaryNoiseMode {
    /// Flip each feature entry independently with the given probability.
    #[default]
    Entry,
    /// Flip every feature of a node with the given probability per node.
    Node,
}

impl BinaryNoiseMode {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "entry" => Ok(BinaryNoiseMode::Entry),
            "node" => Ok(BinaryNoiseMode::Node),
            other => Err(Error::config(format!(
                "unknown binary noise mode `{other}` (expected entry or node)"
            ))),
        }
    }
}

/// What noise to inject before training.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSpec {
    Binary {
        rate: f64,
        mode: BinaryNoiseMode,
        seed: u64,
    },
    Gaussian {
        sigma: f64,
        seed: u64,
    },
    /// Gaussian weights on the `count` eigenvectors of largest eigenvalue.
    HighFrequency {
        count: usize,
        level: f64,
        seed: u64,
    },
}

/// Flip 0/1 entries with probability `rate`.
pub fn inject_binary_noise(
    x: &Array2<f64>,
    rate: f64,
    mode: BinaryNoiseMode,
    seed: u64,
) -> Result<Array2<f64>> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::input(format!(
            "binary noise rate must lie in [0, 1], got {rate}"
        )));
    }
    if x.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::input(
            "binary noise requires 0/1 features; found other values",
        ));
    }
    let stream = Stream::new(seed, "binary-noise");
    let out = match mode {
        BinaryNoiseMode::Entry => Array2::from_shape_fn(x.dim(), |(i, j)| {
            if stream.uniform(&[i as u64, j as u64]) < rate {
                1.0 - x[[i, j]]
            } else {
                x[[i, j]]
            }
        }),
        BinaryNoiseMode::Node => {
            let flip_row: Vec<bool> = (0..x.nrows())
                .map(|i| stream.uniform(&[i as u64]) < rate)
                .collect();
            Array2::from_shape_fn(x.dim(), |(i, j)| {
                if flip_row[i] {
                    1.0 - x[[i, j]]
                } else {
                    x[[i, j]]
                }
            })
        }
    };
    Ok(out)
}

/// Add i.i.d. normal noise with the given standard deviation.
pub fn inject_gaussian_noise(x: &Array2<f64>, sigma: f64, seed: u64) -> Result<Array2<f64>> {
    if sigma < 0.0 {
        return Err(Error::input("gaussian noise sigma must be non-negative"));
    }
    if sigma == 0.0 {
        return Ok(x.clone());
    }
    let stream = Stream::new(seed, "gaussian-noise");
    Ok(Array2::from_shape_fn(x.dim(), |(i, j)| {
        x[[i, j]] + sigma * stream.normal(&[i as u64, j as u64])
    }))
}

/// Add noise confined to the span of the `count` eigenvectors with the
/// largest eigenvalues: per channel, draw `count` normal weights with
/// standard deviation `level` and expand them through those eigenvectors.
/// By construction the perturbation is orthogonal to the remaining,
/// lower-frequency eigenvectors.
pub fn inject_highfreq_noise(
    x: &Array2<f64>,
    es: &EigenSystem,
    count: usize,
    level: f64,
    seed: u64,
) -> Result<Array2<f64>> {
    let n = es.num_nodes();
    if count == 0 || count > n {
        return Err(Error::input(format!(
            "high-frequency component count must lie in [1, {n}], got {count}"
        )));
    }
    if x.nrows() != n {
        return Err(Error::input("signal rows must match the eigensystem"));
    }
    let stream = Stream::new(seed, "highfreq-noise");
    let mut out = x.clone();
    // eigenvalues are ascending; the top `count` columns are the highest
    let first = n - count;
    for c in 0..x.ncols() {
        for (k, col) in (first..n).enumerate() {
            let w = level * stream.normal(&[c as u64, k as u64]);
            for i in 0..n {
                out[[i, c]] += w * es.vectors()[[i, col]];
            }
        }
    }
    Ok(out)
}

/// Apply a [`NoiseSpec`] to a copy of the features. High-frequency noise
/// needs the eigensystem of the graph the features live on.
pub fn apply_noise(
    x: &Array2<f64>,
    spec: &NoiseSpec,
    es: Option<&EigenSystem>,
) -> Result<Array2<f64>> {
    match spec {
        NoiseSpec::Binary { rate, mode, seed } => inject_binary_noise(x, *rate, *mode, *seed),
        NoiseSpec::Gaussian { sigma, seed } => inject_gaussian_noise(x, *sigma, *seed),
        NoiseSpec::HighFrequency { count, level, seed } => {
            let es =
                es.ok_or_else(|| Error::input("high-frequency noise needs the graph eigensystem"))?;
            inject_highfreq_noise(x, es, *count, *level, *seed)
        }
    }
}
