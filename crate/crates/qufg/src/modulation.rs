//! Modulation-function families on `[0, pi]`.
//!
//! A family is a set of `K + 1` non-negative scalar functions
//! `g_0, ..., g_K` whose squares sum to one everywhere on `[0, pi]`.
//! `g_0` is the low-pass band (decreasing from 1), `g_K` the high-pass band
//! (increasing to 1), and any bands between cover mid frequencies. The
//! partition-of-unity property is what makes the stacked transform built in
//! [`crate::spectral`] an exact isometry.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Scalar map used by custom families.
pub type BandFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A validated set of modulation functions.
#[derive(Clone)]
pub enum ModulationFamily {
    /// Two bands built from a logistic ramp; `alpha > 0` controls steepness.
    Sigmoid { alpha: f64 },
    /// Three bands; the middle one is the square root of a scaled binary
    /// entropy curve, `0 < alpha <= 1`.
    Entropy { alpha: f64 },
    /// User-registered bands, validated against the partition identity at
    /// registration time.
    Custom { name: String, bands: Vec<BandFn> },
}

impl fmt::Debug for ModulationFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModulationFamily::Sigmoid { alpha } => write!(f, "Sigmoid(alpha={alpha})"),
            ModulationFamily::Entropy { alpha } => write!(f, "Entropy(alpha={alpha})"),
            ModulationFamily::Custom { name, bands } => {
                write!(f, "Custom({name}, bands={})", bands.len())
            }
        }
    }
}

pub const DEFAULT_SIGMOID_ALPHA: f64 = 20.0;
pub const DEFAULT_ENTROPY_ALPHA: f64 = 0.75;

/// Grid size used when validating families.
const VALIDATION_GRID: usize = 1001;
/// Largest partition deviation accepted when registering a custom family.
const REGISTRATION_TOLERANCE: f64 = 1e-8;

impl ModulationFamily {
    pub fn sigmoid(alpha: f64) -> Result<Self> {
        if alpha <= 0.0 || !alpha.is_finite() {
            return Err(Error::config(format!(
                "sigmoid family requires alpha > 0, got {alpha}"
            )));
        }
        Ok(ModulationFamily::Sigmoid { alpha })
    }

    pub fn entropy(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::config(format!(
                "entropy family requires 0 < alpha <= 1, got {alpha}"
            )));
        }
        Ok(ModulationFamily::Entropy { alpha })
    }

    /// Register a custom family from `K + 1` scalar maps. The partition
    /// identity is checked on a 1001-point grid before the family is
    /// accepted.
    pub fn custom(name: impl Into<String>, bands: Vec<BandFn>) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::config("custom family needs at least one band"));
        }
        let fam = ModulationFamily::Custom {
            name: name.into(),
            bands,
        };
        let dev = fam.validate_partition(VALIDATION_GRID)?;
        if dev > REGISTRATION_TOLERANCE {
            return Err(Error::config(format!(
                "custom family violates the partition identity (max deviation {dev:.3e})"
            )));
        }
        Ok(fam)
    }

    /// Number of high-pass bands `K`; the family has `K + 1` functions.
    pub fn num_highpass(&self) -> usize {
        match self {
            ModulationFamily::Sigmoid { .. } => 1,
            ModulationFamily::Entropy { .. } => 2,
            ModulationFamily::Custom { bands, .. } => bands.len() - 1,
        }
    }

    /// Evaluate band `k` at `xi`. Arguments are clamped to `[0, pi]`;
    /// anything outside that range can only arise from floating-point slack
    /// in the scaled spectrum.
    pub fn evaluate(&self, k: usize, xi: f64) -> Result<f64> {
        let kmax = self.num_highpass();
        if k > kmax {
            return Err(Error::input(format!(
                "band index {k} out of range for a family with {} bands",
                kmax + 1
            )));
        }
        let xi = xi.clamp(0.0, PI);
        Ok(match self {
            ModulationFamily::Sigmoid { alpha } => {
                let s = 1.0 / (1.0 + (-alpha * (xi / PI - 0.5)).exp());
                if k == 0 {
                    (1.0 - s).max(0.0).sqrt()
                } else {
                    s.sqrt()
                }
            }
            ModulationFamily::Entropy { alpha } => {
                let x = xi / PI;
                let g1_sq = (4.0 * alpha * x - 4.0 * alpha * x * x).max(0.0);
                match k {
                    1 => g1_sq.sqrt(),
                    // The boundary point belongs to the low band: g_2 is
                    // nonzero strictly above pi/2.
                    0 => {
                        if xi <= PI / 2.0 {
                            (1.0 - g1_sq).max(0.0).sqrt()
                        } else {
                            0.0
                        }
                    }
                    _ => {
                        if xi > PI / 2.0 {
                            (1.0 - g1_sq).max(0.0).sqrt()
                        } else {
                            0.0
                        }
                    }
                }
            }
            ModulationFamily::Custom { bands, .. } => bands[k](xi),
        })
    }

    /// Maximum deviation of the partition identity over a uniform grid.
    pub fn validate_partition(&self, grid_size: usize) -> Result<f64> {
        if grid_size < 2 {
            return Err(Error::input("partition grid needs at least 2 points"));
        }
        let mut worst = 0.0f64;
        for i in 0..grid_size {
            let xi = PI * i as f64 / (grid_size - 1) as f64;
            let mut total = 0.0;
            for k in 0..=self.num_highpass() {
                let g = self.evaluate(k, xi)?;
                total += g * g;
            }
            worst = worst.max((total - 1.0).abs());
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    #[test]
    fn sigmoid_midpoint_splits_evenly() {
        let fam = ModulationFamily::sigmoid(20.0).unwrap();
        let g0 = fam.evaluate(0, PI / 2.0).unwrap();
        let g1 = fam.evaluate(1, PI / 2.0).unwrap();
        assert!((g0 - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((g1 - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn entropy_branch_values_at_midpoint() {
        let fam = ModulationFamily::entropy(0.75).unwrap();
        assert!((fam.evaluate(1, PI / 2.0).unwrap() - 0.75f64.sqrt()).abs() < 1e-12);
        assert!((fam.evaluate(0, PI / 2.0).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(fam.evaluate(2, PI / 2.0).unwrap(), 0.0);
    }

    #[test]
    fn entropy_middle_band_vanishes_at_ends() {
        let fam = ModulationFamily::entropy(0.75).unwrap();
        assert!(fam.evaluate(1, 0.0).unwrap().abs() < 1e-15);
        assert!(fam.evaluate(1, PI).unwrap().abs() < 1e-15);
    }

    #[test]
    fn partition_identity_on_grid() {
        for fam in [
            ModulationFamily::sigmoid(20.0).unwrap(),
            ModulationFamily::entropy(0.75).unwrap(),
            ModulationFamily::entropy(1.0).unwrap(),
        ] {
            assert!(fam.validate_partition(1001).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn binary_entropy_case_peaks_at_one() {
        let fam = ModulationFamily::entropy(1.0).unwrap();
        assert!((fam.evaluate(1, PI / 2.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_peak_of_middle_band_is_alpha() {
        let alpha = 0.75;
        let fam = ModulationFamily::entropy(alpha).unwrap();
        let grid = 1001;
        let mut best = (0usize, 0.0f64);
        for i in 0..grid {
            let xi = PI * i as f64 / (grid - 1) as f64;
            let v = fam.evaluate(1, xi).unwrap().powi(2);
            if v > best.1 {
                best = (i, v);
            }
        }
        assert!((best.1 - alpha).abs() < 1e-6);
        // within one grid step of the midpoint
        assert!((best.0 as i64 - (grid as i64 - 1) / 2).unsigned_abs() <= 1);
    }

    #[test]
    fn sigmoid_partition_pointwise_random() {
        let fam = ModulationFamily::sigmoid(20.0).unwrap();
        let s = Stream::new(11, "mod-test");
        for i in 0..10 {
            let xi = s.uniform_in(0.0, PI, &[i]);
            let g0 = fam.evaluate(0, xi).unwrap();
            let g1 = fam.evaluate(1, xi).unwrap();
            assert!((g0 * g0 + g1 * g1 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn monotone_outer_bands() {
        for fam in [
            ModulationFamily::sigmoid(20.0).unwrap(),
            ModulationFamily::entropy(0.75).unwrap(),
        ] {
            let kmax = fam.num_highpass();
            let grid = 1001;
            let mut prev0 = f64::INFINITY;
            let mut prev_k = -f64::INFINITY;
            for i in 0..grid {
                let xi = PI * i as f64 / (grid - 1) as f64;
                let g0 = fam.evaluate(0, xi).unwrap();
                let gk = fam.evaluate(kmax, xi).unwrap();
                assert!(g0 <= prev0 + 1e-9, "g0 not non-increasing at {xi}");
                assert!(gk >= prev_k - 1e-9, "gK not non-decreasing at {xi}");
                prev0 = g0;
                prev_k = gk;
            }
            // g0 starts at its maximum
            let g0_at_zero = fam.evaluate(0, 0.0).unwrap();
            let max0 = (0..grid)
                .map(|i| fam.evaluate(0, PI * i as f64 / (grid - 1) as f64).unwrap())
                .fold(0.0f64, f64::max);
            assert!((g0_at_zero - max0).abs() <= 1e-6);
        }
    }

    #[test]
    fn alpha_domains_are_enforced() {
        assert!(ModulationFamily::sigmoid(0.0).is_err());
        assert!(ModulationFamily::sigmoid(-3.0).is_err());
        assert!(ModulationFamily::entropy(0.0).is_err());
        assert!(ModulationFamily::entropy(1.5).is_err());
    }

    #[test]
    fn band_index_out_of_range_is_an_error() {
        let fam = ModulationFamily::sigmoid(20.0).unwrap();
        assert!(fam.evaluate(2, 1.0).is_err());
    }

    #[test]
    fn partition_holds_across_the_exposed_parameter_ranges() {
        // any alpha reachable through configuration keeps the identity
        let s = Stream::new(41, "alpha-sweep");
        for i in 0..25u64 {
            let sig = ModulationFamily::sigmoid(s.uniform_in(0.05, 100.0, &[i])).unwrap();
            assert!(sig.validate_partition(257).unwrap() <= 1e-10);
            let ent = ModulationFamily::entropy(s.uniform_in(1e-3, 1.0, &[i, 1])).unwrap();
            assert!(ent.validate_partition(257).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn custom_family_is_validated_at_registration() {
        // A single constant band is a valid K = 0 family.
        let ok = ModulationFamily::custom("allpass", vec![Arc::new(|_| 1.0) as BandFn]);
        assert!(ok.is_ok());
        // Two constant 1 bands break the identity.
        let bad = ModulationFamily::custom(
            "broken",
            vec![Arc::new(|_| 1.0) as BandFn, Arc::new(|_| 1.0) as BandFn],
        );
        assert!(bad.is_err());
    }
}
