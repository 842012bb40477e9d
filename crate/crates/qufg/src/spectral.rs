//! Eigendecomposition-based exact quasi-framelet transform.
//!
//! The transform stacks one low-pass block and `K * (L + 1)` band-pass
//! blocks, each of the form `U f(Lambda) U^T` where `f` chains modulation
//! evaluations at dyadically scaled arguments. Because the modulation
//! family is a partition of unity, the stacked operator is an isometry and
//! reconstruction is its transpose.

use std::f64::consts::PI;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::NormalizedLaplacian;
use crate::linalg::symmetric_eigen;
use crate::modulation::ModulationFamily;

/// Node count above which the dense eigendecomposition path refuses to run.
pub const EXACT_EIGEN_MAX_NODES: usize = 3000;

/// Sorted eigenvalues and orthogonal eigenvectors of a normalized
/// Laplacian.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    lambdas: Vec<f64>,
    /// Eigenvectors as columns, matching `lambdas`.
    vectors: Array2<f64>,
}

impl EigenSystem {
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }

    pub fn num_nodes(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambdas.last().copied().unwrap_or(0.0)
    }

    /// Dense operator `U f(Lambda) U^T` for a scalar spectral multiplier.
    /// The result is mirrored from its upper triangle so it is symmetric
    /// bit-for-bit.
    #[allow(clippy::needless_range_loop)]
    pub fn spectral_operator(&self, f: impl Fn(f64) -> f64) -> Array2<f64> {
        let n = self.num_nodes();
        let weights: Vec<f64> = self.lambdas.iter().map(|&l| f(l)).collect();
        let mut out = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for t in 0..n {
                    acc += weights[t] * (self.vectors[[i, t]] * self.vectors[[j, t]]);
                }
                out[[i, j]] = acc;
                out[[j, i]] = acc;
            }
        }
        out
    }
}

/// Dense eigendecomposition of the normalized Laplacian. Bounded by
/// [`EXACT_EIGEN_MAX_NODES`]; larger graphs must use the Chebyshev path.
pub fn eigendecompose(lap: &NormalizedLaplacian) -> Result<EigenSystem> {
    let n = lap.num_nodes();
    if n > EXACT_EIGEN_MAX_NODES {
        return Err(Error::Capability(format!(
            "dense eigendecomposition is limited to {EXACT_EIGEN_MAX_NODES} nodes \
             (got {n}); use the Chebyshev fast transform instead"
        )));
    }
    let (lambdas, vectors) = symmetric_eigen(&lap.matrix().to_dense());
    Ok(EigenSystem { lambdas, vectors })
}

/// Smallest integer `m` with `dilation^(-m) * lambda_max <= pi`, so every
/// scaled eigenvalue falls inside the modulation domain.
pub fn coarsest_scale(lambda_max: f64, dilation: f64) -> i32 {
    if lambda_max <= 0.0 {
        return 0;
    }
    let mut m = (lambda_max / PI).log(dilation).ceil() as i32;
    // guard the ceil against log slack at exact boundaries
    while dilation.powi(-(m - 1)) * lambda_max <= PI {
        m -= 1;
    }
    while dilation.powi(-m) * lambda_max > PI {
        m += 1;
    }
    m
}

/// Shape of a quasi-framelet transform: family, number of extra levels,
/// coarsest scale and the dilation base.
#[derive(Debug, Clone)]
pub struct FrameletSpec {
    pub family: ModulationFamily,
    pub levels: usize,
    pub coarsest_scale: i32,
    pub dilation: f64,
}

impl FrameletSpec {
    pub fn new(
        family: ModulationFamily,
        levels: usize,
        dilation: f64,
        lambda_max: f64,
    ) -> Result<Self> {
        if dilation <= 1.0 || !dilation.is_finite() {
            return Err(Error::config(format!(
                "dilation must exceed 1, got {dilation}"
            )));
        }
        Ok(FrameletSpec {
            family,
            levels,
            coarsest_scale: coarsest_scale(lambda_max, dilation),
            dilation,
        })
    }

    pub fn num_highpass(&self) -> usize {
        self.family.num_highpass()
    }

    /// Total number of coefficient blocks, `1 + K * (L + 1)`.
    pub fn block_count(&self) -> usize {
        1 + self.num_highpass() * (self.levels + 1)
    }

    /// `(band, level)` labels in canonical stacking order: the low-pass
    /// chain first, then band-pass blocks level by level.
    pub fn block_labels(&self) -> Vec<(usize, usize)> {
        let mut labels = Vec::with_capacity(self.block_count());
        labels.push((0, self.levels));
        for level in 0..=self.levels {
            for band in 1..=self.num_highpass() {
                labels.push((band, level));
            }
        }
        labels
    }

    /// Flat index of block `(band, level)` in canonical order.
    pub fn block_index(&self, band: usize, level: usize) -> usize {
        if band == 0 {
            0
        } else {
            1 + level * self.num_highpass() + (band - 1)
        }
    }

    /// Scaled modulation argument for `lambda` at the given level.
    fn scaled(&self, lambda: f64, level: usize) -> f64 {
        lambda / self.dilation.powi(self.coarsest_scale + level as i32)
    }

    /// Scalar spectral multiplier of block `(band, level)`: the band
    /// evaluation at its level times the low-pass chain below it.
    pub fn block_multiplier(&self, band: usize, level: usize, lambda: f64) -> Result<f64> {
        let chain_top = if band == 0 { level + 1 } else { level };
        let mut m = 1.0;
        for j in 0..chain_top {
            m *= self.family.evaluate(0, self.scaled(lambda, j))?;
        }
        if band > 0 {
            m *= self.family.evaluate(band, self.scaled(lambda, level))?;
        }
        Ok(m)
    }
}

/// Ordered coefficient blocks produced by decomposition.
#[derive(Debug, Clone)]
pub struct FrameletCoefficients {
    pub blocks: Vec<Array2<f64>>,
    pub num_highpass: usize,
    pub levels: usize,
}

impl FrameletCoefficients {
    pub fn num_nodes(&self) -> usize {
        self.blocks.first().map_or(0, |b| b.nrows())
    }

    pub fn num_channels(&self) -> usize {
        self.blocks.first().map_or(0, |b| b.ncols())
    }

    /// Sum of squared Frobenius norms over all blocks.
    pub fn total_energy(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }
}

/// Materialize every transform block as a dense symmetric matrix, in
/// canonical order.
pub fn build_transform_blocks(es: &EigenSystem, spec: &FrameletSpec) -> Result<Vec<Array2<f64>>> {
    let mut blocks = Vec::with_capacity(spec.block_count());
    for (band, level) in spec.block_labels() {
        // probe the multiplier once so band errors surface before the O(N^3) work
        spec.block_multiplier(band, level, es.lambda_max())?;
        blocks.push(es.spectral_operator(|lambda| {
            spec.block_multiplier(band, level, lambda)
                .expect("band index validated above")
        }));
    }
    Ok(blocks)
}

/// Apply each block to the signal: coefficient block `(k, l)` is
/// `W_(k,l) . X`.
pub fn decompose_exact(
    blocks: &[Array2<f64>],
    spec: &FrameletSpec,
    x: &Array2<f64>,
) -> Result<FrameletCoefficients> {
    if blocks.len() != spec.block_count() {
        return Err(Error::input(format!(
            "expected {} transform blocks, got {}",
            spec.block_count(),
            blocks.len()
        )));
    }
    let n = x.nrows();
    if blocks.iter().any(|b| b.nrows() != n || b.ncols() != n) {
        return Err(Error::input("transform blocks do not match signal size"));
    }
    Ok(FrameletCoefficients {
        blocks: blocks.iter().map(|w| w.dot(x)).collect(),
        num_highpass: spec.num_highpass(),
        levels: spec.levels,
    })
}

/// Adjoint of [`decompose_exact`]: sums `W_(k,l)^T . C_(k,l)` over blocks.
pub fn reconstruct_exact(
    blocks: &[Array2<f64>],
    coeffs: &FrameletCoefficients,
) -> Result<Array2<f64>> {
    if blocks.len() != coeffs.blocks.len() {
        return Err(Error::input(format!(
            "coefficient/block count mismatch: {} vs {}",
            coeffs.blocks.len(),
            blocks.len()
        )));
    }
    let n = coeffs.num_nodes();
    let d = coeffs.num_channels();
    let mut out = Array2::<f64>::zeros((n, d));
    for (w, c) in blocks.iter().zip(&coeffs.blocks) {
        if c.nrows() != n || c.ncols() != d || w.nrows() != n {
            return Err(Error::input("coefficient block shape mismatch"));
        }
        out += &w.t().dot(c);
    }
    Ok(out)
}

/// Which atom to materialize: the low-pass atom or a band-pass atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomKind {
    Low,
    High(usize),
}

/// Spatial-domain framelet atom centred at node `p`: the vector whose
/// inner product with a signal yields that signal's single-scale
/// coefficient at `(kind, level, p)`. Uses the same coarsest-scale-shifted
/// argument as the transform blocks.
pub fn framelet_atom(
    es: &EigenSystem,
    spec: &FrameletSpec,
    kind: AtomKind,
    level: usize,
    p: usize,
) -> Result<Vec<f64>> {
    let band = match kind {
        AtomKind::Low => 0,
        AtomKind::High(k) => k,
    };
    let n = es.num_nodes();
    if p >= n {
        return Err(Error::input(format!("atom centre {p} out of range")));
    }
    let mut atom = vec![0.0; n];
    for (i, &lambda) in es.lambdas().iter().enumerate() {
        let w = spec.family.evaluate(band, spec.scaled(lambda, level))?;
        let up = es.vectors()[[p, i]];
        for (v, a) in atom.iter_mut().enumerate() {
            *a += w * up * es.vectors()[[v, i]];
        }
    }
    Ok(atom)
}
