//! One quasi-framelet convolution layer: forward pass, cache, and
//! hand-derived backward pass.

use ndarray::{Array1, Array2};

use crate::cheb::{fast_decompose, fast_reconstruct, FastTransformPlan};
use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::spectral::FrameletCoefficients;

/// Filtering variant of the convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    /// Diagonal spectral rescaling only; the layer nonlinearity does the
    /// rest.
    #[default]
    ReluFilter,
    /// Diagonal rescaling followed by learnable per-block soft
    /// thresholding of the coefficients.
    Shrinkage,
}

impl Variant {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "relu" => Ok(Variant::ReluFilter),
            "shrinkage" => Ok(Variant::Shrinkage),
            other => Err(Error::config(format!(
                "unknown model variant `{other}` (expected relu or shrinkage)"
            ))),
        }
    }
}

/// Layer activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(&self, y: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Relu => y.mapv(|v| v.max(0.0)),
            Activation::Identity => y.clone(),
        }
    }

    /// Elementwise derivative evaluated at the pre-activation, with the
    /// subgradient 0 at the kink.
    fn derivative(&self, y: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Relu => y.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 }),
            Activation::Identity => Array2::ones(y.dim()),
        }
    }
}

/// Shrinkage `sign(c) * max(|c| - t, 0)`.
pub fn soft_threshold(c: f64, t: f64) -> f64 {
    c.signum() * (c.abs() - t).max(0.0)
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Parameters of one convolution layer.
///
/// The spectral filter holds one learnable diagonal per coefficient block,
/// shared across all feature channels, so filtering costs `N` parameters
/// per block instead of `N x d`. Shrink thresholds are stored as free
/// scalars and mapped through softplus so they stay non-negative.
#[derive(Debug, Clone)]
pub struct ConvLayerParams {
    /// `d_in x d_out` feature projection applied before decomposition.
    pub feature_weights: Array2<f64>,
    /// `block_count x N`, one diagonal per coefficient block.
    pub spectral_filter: Array2<f64>,
    /// Free per-block scalars; threshold of block `b` is
    /// `softplus(shrink_raw[b])`. Used only by the shrinkage variant.
    pub shrink_raw: Array1<f64>,
}

/// Initial shrink threshold after softplus.
const SHRINK_INIT: f64 = 1e-4;

impl ConvLayerParams {
    /// Zero-filled container with the same shapes; used for gradients.
    pub fn zeros_like(&self) -> Self {
        ConvLayerParams {
            feature_weights: Array2::zeros(self.feature_weights.dim()),
            spectral_filter: Array2::zeros(self.spectral_filter.dim()),
            shrink_raw: Array1::zeros(self.shrink_raw.len()),
        }
    }

    pub fn threshold(&self, block: usize) -> f64 {
        softplus(self.shrink_raw[block])
    }

    /// The three tensors in declaration order, flattened. This order is
    /// shared by the optimizer state and the checkpoint format.
    pub fn tensor_slices(&self) -> Vec<&[f64]> {
        vec![
            self.feature_weights.as_slice().expect("contiguous"),
            self.spectral_filter.as_slice().expect("contiguous"),
            self.shrink_raw.as_slice().expect("contiguous"),
        ]
    }

    pub fn tensor_slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.feature_weights.as_slice_mut().expect("contiguous"),
            self.spectral_filter.as_slice_mut().expect("contiguous"),
            self.shrink_raw.as_slice_mut().expect("contiguous"),
        ]
    }
}

/// Seeded initialisation: uniform `(-a, a)` feature weights with
/// `a = sqrt(6 / (d_in + d_out))`, all-ones spectral filter (identity
/// filtering at epoch zero), thresholds starting at 1e-4.
///
/// `tag` names the layer's draw stream; reusing a tag reproduces the
/// exact same tensor for a given seed.
pub fn init_conv_params(
    seed: u64,
    tag: &str,
    d_in: usize,
    d_out: usize,
    block_count: usize,
    num_nodes: usize,
) -> ConvLayerParams {
    let stream = Stream::new(seed, &format!("init.{tag}.w"));
    let a = (6.0 / (d_in + d_out) as f64).sqrt();
    let feature_weights = Array2::from_shape_fn((d_in, d_out), |(i, j)| {
        stream.uniform_in(-a, a, &[i as u64, j as u64])
    });
    let raw = (SHRINK_INIT.exp() - 1.0f64).ln();
    ConvLayerParams {
        feature_weights,
        spectral_filter: Array2::ones((block_count, num_nodes)),
        shrink_raw: Array1::from_elem(block_count, raw),
    }
}

/// Intermediates needed by the backward pass.
pub struct ConvCache {
    pub input: Array2<f64>,
    pub projected: Array2<f64>,
    /// Raw decomposition of the projected features.
    pub coeffs: FrameletCoefficients,
    /// Diagonal-rescaled coefficients, kept when shrinkage needs them.
    pub rescaled: Option<Vec<Array2<f64>>>,
    /// Pre-activation output.
    pub preact: Array2<f64>,
    pub activation: Activation,
}

/// Forward pass returning the activations only.
pub fn conv_forward(
    plan: &FastTransformPlan,
    params: &ConvLayerParams,
    x: &Array2<f64>,
    activation: Activation,
    variant: Variant,
) -> Result<Array2<f64>> {
    conv_forward_cached(plan, params, x, activation, variant).map(|(out, _)| out)
}

/// Forward pass keeping the cache for [`conv_backward`].
pub fn conv_forward_cached(
    plan: &FastTransformPlan,
    params: &ConvLayerParams,
    x: &Array2<f64>,
    activation: Activation,
    variant: Variant,
) -> Result<(Array2<f64>, ConvCache)> {
    if x.ncols() != params.feature_weights.nrows() {
        return Err(Error::input(format!(
            "layer expects {} input channels, got {}",
            params.feature_weights.nrows(),
            x.ncols()
        )));
    }
    if params.spectral_filter.nrows() != plan.block_count()
        || params.spectral_filter.ncols() != plan.num_nodes()
    {
        return Err(Error::input(format!(
            "spectral filter is {:?}, plan needs ({}, {})",
            params.spectral_filter.dim(),
            plan.block_count(),
            plan.num_nodes()
        )));
    }

    let projected = x.dot(&params.feature_weights);
    let coeffs = fast_decompose(plan, &projected)?;

    let mut rescaled = Vec::with_capacity(coeffs.blocks.len());
    for (b, block) in coeffs.blocks.iter().enumerate() {
        let mut s = block.clone();
        for (i, mut row) in s.rows_mut().into_iter().enumerate() {
            let theta = params.spectral_filter[[b, i]];
            row.mapv_inplace(|v| v * theta);
        }
        rescaled.push(s);
    }

    let filtered = match variant {
        Variant::ReluFilter => rescaled.clone(),
        Variant::Shrinkage => rescaled
            .iter()
            .enumerate()
            .map(|(b, s)| {
                let t = params.threshold(b);
                s.mapv(|v| soft_threshold(v, t))
            })
            .collect(),
    };

    let preact = fast_reconstruct(
        plan,
        &FrameletCoefficients {
            blocks: filtered,
            num_highpass: coeffs.num_highpass,
            levels: coeffs.levels,
        },
    )?;
    let out = activation.apply(&preact);
    let cache = ConvCache {
        input: x.clone(),
        projected,
        coeffs,
        rescaled: matches!(variant, Variant::Shrinkage).then_some(rescaled),
        preact,
        activation,
    };
    Ok((out, cache))
}

/// Backward pass. Returns the parameter gradients and the gradient with
/// respect to the layer input.
pub fn conv_backward(
    plan: &FastTransformPlan,
    params: &ConvLayerParams,
    cache: &ConvCache,
    d_out: &Array2<f64>,
    variant: Variant,
) -> Result<(ConvLayerParams, Array2<f64>)> {
    let mut grads = params.zeros_like();

    let d_preact = d_out * &cache.activation.derivative(&cache.preact);

    // adjoint of masked reconstruction is masked decomposition
    let mut d_filtered = fast_decompose(plan, &d_preact)?;
    for (b, keep) in plan.mask().iter().enumerate() {
        if !keep {
            d_filtered.blocks[b].fill(0.0);
        }
    }

    // back through shrinkage (if any) and the diagonal rescale
    let mut d_coeffs = Vec::with_capacity(d_filtered.blocks.len());
    for (b, d_f) in d_filtered.blocks.iter().enumerate() {
        let d_rescaled = match variant {
            Variant::ReluFilter => d_f.clone(),
            Variant::Shrinkage => {
                let s = &cache.rescaled.as_ref().expect("shrinkage cache")[b];
                let t = params.threshold(b);
                let mut d_t = 0.0;
                let mut d_s = d_f.clone();
                for (ds, &sv) in d_s.iter_mut().zip(s.iter()) {
                    if sv.abs() > t {
                        d_t += *ds * (-sv.signum());
                    } else {
                        *ds = 0.0;
                    }
                }
                grads.shrink_raw[b] = d_t * sigmoid(params.shrink_raw[b]);
                d_s
            }
        };
        let raw = &cache.coeffs.blocks[b];
        let mut d_c = d_rescaled.clone();
        for (i, mut row) in d_c.rows_mut().into_iter().enumerate() {
            let theta = params.spectral_filter[[b, i]];
            let mut d_theta = 0.0;
            for (c, v) in row.iter_mut().enumerate() {
                d_theta += *v * raw[[i, c]];
                *v *= theta;
            }
            grads.spectral_filter[[b, i]] = d_theta;
        }
        d_coeffs.push(d_c);
    }

    // adjoint of decomposition is unmasked reconstruction; masked blocks
    // already carry zero gradient so the plan's mask is a no-op here
    let d_projected = fast_reconstruct(
        plan,
        &FrameletCoefficients {
            blocks: d_coeffs,
            num_highpass: cache.coeffs.num_highpass,
            levels: cache.coeffs.levels,
        },
    )?;

    grads.feature_weights = cache.input.t().dot(&d_projected);
    let d_input = d_projected.dot(&params.feature_weights.t());
    Ok((grads, d_input))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cheb::CutoffMode;
    use crate::graph::{Graph, NormalizedLaplacian};
    use crate::modulation::ModulationFamily;
    use crate::rng::Stream;

    fn max_abs(a: &Array2<f64>) -> f64 {
        a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    fn plan(
        n: usize,
        seed: u64,
        levels: usize,
        degree: usize,
        cutoff: CutoffMode,
    ) -> FastTransformPlan {
        let s = Stream::new(seed, "conv-test-graph");
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
            ModulationFamily::sigmoid(5.0).unwrap(),
            levels,
            2.0,
            degree,
            cutoff,
        )
        .unwrap()
    }

    fn random_signal(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let s = Stream::new(seed, "conv-test-signal");
        Array2::from_shape_fn((n, d), |(i, j)| s.normal(&[i as u64, j as u64]))
    }

    #[test]
    fn soft_threshold_cases() {
        assert!((soft_threshold(0.5, 0.2) - 0.3).abs() < 1e-15);
        assert_eq!(soft_threshold(-0.1, 0.2), 0.0);
        for x in [-2.5, -0.3, 0.0, 0.7, 4.0] {
            assert_eq!(soft_threshold(x, 0.0), x);
        }
    }

    #[test]
    fn shrinkage_never_grows_magnitudes() {
        let s = Stream::new(1, "shrink");
        for i in 0..200u64 {
            let c = s.normal(&[i]) * 3.0;
            let t = s.uniform(&[i, 1]) * 2.0;
            assert!(soft_threshold(c, t).abs() <= c.abs() + 1e-15);
        }
    }

    #[test]
    fn identity_filter_with_fine_polynomial_is_transparent() {
        // gentle sigmoid + high degree: reconstruction is exact to 1e-8,
        // so unit filters make the conv a plain feature projection
        let plan = plan(10, 2, 1, 32, CutoffMode::None);
        let params = init_conv_params(3, "t", 4, 3, plan.block_count(), 10);
        let x = random_signal(10, 4, 4);
        let out = conv_forward(
            &plan,
            &params,
            &x,
            Activation::Identity,
            Variant::ReluFilter,
        )
        .unwrap();
        let expect = x.dot(&params.feature_weights);
        assert!(max_abs(&(&out - &expect)) <= 1e-8);
    }

    #[test]
    fn zero_filter_gives_zero_output() {
        let plan = plan(8, 5, 1, 3, CutoffMode::None);
        let mut params = init_conv_params(6, "t", 3, 2, plan.block_count(), 8);
        params.spectral_filter.fill(0.0);
        let x = random_signal(8, 3, 7);
        let out = conv_forward(&plan, &params, &x, Activation::Relu, Variant::ReluFilter).unwrap();
        assert_eq!(out, Array2::zeros((8, 2)));
    }

    #[test]
    fn conv_matches_dense_operator_oracle() {
        use crate::spectral::eigendecompose;
        let plan = plan(9, 8, 1, 3, CutoffMode::Partial);
        let n = 9;
        let mut params = init_conv_params(9, "t", 3, 2, plan.block_count(), n);
        let theta_stream = Stream::new(11, "theta");
        for (idx, v) in params.spectral_filter.iter_mut().enumerate() {
            *v = 1.0 + 0.3 * theta_stream.normal(&[idx as u64]);
        }
        let x = random_signal(n, 3, 12);
        let out = conv_forward(
            &plan,
            &params,
            &x,
            Activation::Identity,
            Variant::ReluFilter,
        )
        .unwrap();

        // dense oracle: sum over kept blocks of W_b^T diag(theta_b) W_b X'
        let es = eigendecompose(plan.laplacian()).unwrap();
        let xp = x.dot(&params.feature_weights);
        let mut expect = Array2::<f64>::zeros((n, 2));
        for (b, &(band, level)) in plan.spec().block_labels().iter().enumerate() {
            if !plan.mask()[b] {
                continue;
            }
            let w = es.spectral_operator(|l| plan.polynomial_block_multiplier(band, level, l));
            let mut filtered = w.dot(&xp);
            for (i, mut row) in filtered.rows_mut().into_iter().enumerate() {
                let t = params.spectral_filter[[b, i]];
                row.mapv_inplace(|v| v * t);
            }
            expect += &w.t().dot(&filtered);
        }
        assert!(max_abs(&(&out - &expect)) <= 1e-9);
    }

    #[test]
    fn filter_core_is_linear_in_the_projected_signal() {
        let plan = plan(11, 13, 1, 3, CutoffMode::Full);
        let mut params = init_conv_params(14, "t", 3, 3, plan.block_count(), 11);
        // identity projection isolates the spectral core
        params.feature_weights = Array2::eye(3);
        let x = random_signal(11, 3, 15);
        let y = random_signal(11, 3, 16);
        let (a, b) = (1.7, -0.4);
        let fx = conv_forward(
            &plan,
            &params,
            &x,
            Activation::Identity,
            Variant::ReluFilter,
        )
        .unwrap();
        let fy = conv_forward(
            &plan,
            &params,
            &y,
            Activation::Identity,
            Variant::ReluFilter,
        )
        .unwrap();
        let mixed = conv_forward(
            &plan,
            &params,
            &(a * &x + b * &y),
            Activation::Identity,
            Variant::ReluFilter,
        )
        .unwrap();
        assert!(max_abs(&(&mixed - &(a * &fx + b * &fy))) <= 1e-10);
    }

    #[test]
    fn cutoff_shrinks_output_norm_monotonically() {
        for seed in [21u64, 22, 23] {
            let base = plan(12, seed, 2, 3, CutoffMode::None);
            let mut params = init_conv_params(seed + 1, "t", 3, 3, base.block_count(), 12);
            params.feature_weights = Array2::eye(3);
            let x = random_signal(12, 3, seed + 2);
            let norm = |m: CutoffMode| {
                let p = base.clone().with_cutoff(m);
                let out = conv_forward(&p, &params, &x, Activation::Identity, Variant::ReluFilter)
                    .unwrap();
                out.iter().map(|v| v * v).sum::<f64>().sqrt()
            };
            let none = norm(CutoffMode::None);
            let partial = norm(CutoffMode::Partial);
            let full = norm(CutoffMode::Full);
            assert!(full <= partial + 1e-12, "seed {seed}");
            assert!(partial <= none + 1e-12, "seed {seed}");
        }
    }
}
