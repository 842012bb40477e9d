//! Experiment configuration: a TOML file with nested sections. Unknown
//! keys are rejected with the list of valid ones.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::cheb::CutoffMode;
use crate::error::{Error, Result};
use crate::modulation::ModulationFamily;
use crate::neural::{MergeMode, TrainConfig, Variant};
use crate::noise::{BinaryNoiseMode, NoiseSpec};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub modulation: ModulationSection,
    #[serde(default)]
    pub framelet: FrameletSection,
    #[serde(default)]
    pub chebyshev: ChebyshevSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub noise: Option<NoiseSection>,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub manifest: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub variant: String,
    pub hidden: usize,
    /// Semantic merge for heterogeneous datasets.
    pub merge: String,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            variant: "relu".into(),
            hidden: 32,
            merge: "mean".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModulationSection {
    pub family: String,
    pub alpha: Option<f64>,
}

impl Default for ModulationSection {
    fn default() -> Self {
        ModulationSection {
            family: "entropy".into(),
            alpha: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrameletSection {
    pub levels: usize,
    pub dilation: f64,
    pub cutoff: String,
}

impl Default for FrameletSection {
    fn default() -> Self {
        FrameletSection {
            levels: 1,
            dilation: 2.0,
            cutoff: "none".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChebyshevSection {
    pub degree: usize,
}

impl Default for ChebyshevSection {
    fn default() -> Self {
        ChebyshevSection { degree: 3 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub early_stop_patience: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub dropout: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            learning_rate: 0.01,
            weight_decay: 5e-4,
            epochs: 200,
            early_stop_patience: 30,
            seed: 42,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            dropout: 0.3,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub kind: String,
    pub level: f64,
    #[serde(default)]
    pub binary_mode: Option<String>,
    #[serde(default)]
    pub freq_count: Option<usize>,
    /// `raw` takes `level` literally; `percent` divides it by 100, for
    /// configs quoted in percent.
    #[serde(default)]
    pub scale: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub repeats: usize,
    /// `wall` records wall-clock seconds per run; `none` writes zeros so
    /// the output files are byte-stable.
    pub timing: String,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            repeats: 1,
            timing: "wall".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// `alpha` sweeps the modulation parameter; `degree` sweeps the
    /// Chebyshev degree and reports approximation error.
    pub kind: String,
    pub values: Vec<f64>,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::load(path.display().to_string(), 0, e.to_string()))?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        let base = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok((cfg, base))
    }

    pub fn from_str_for_tests(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.family()?;
        self.variant()?;
        self.cutoff()?;
        self.merge()?;
        if let Some(noise) = &self.noise {
            self.noise_spec_for(noise, self.train.seed)?;
        }
        if self.experiment.repeats == 0 {
            return Err(Error::config("experiment.repeats must be at least 1"));
        }
        match self.experiment.timing.as_str() {
            "wall" | "none" => {}
            other => {
                return Err(Error::config(format!(
                    "unknown timing mode `{other}` (expected wall or none)"
                )))
            }
        }
        if let Some(sweep) = &self.sweep {
            match sweep.kind.as_str() {
                "alpha" | "degree" => {}
                other => {
                    return Err(Error::config(format!(
                        "unknown sweep kind `{other}` (expected alpha or degree)"
                    )))
                }
            }
            if sweep.values.is_empty() {
                return Err(Error::config("sweep.values must not be empty"));
            }
        }
        Ok(())
    }

    pub fn family(&self) -> Result<ModulationFamily> {
        self.family_with_alpha(self.modulation.alpha)
    }

    pub fn family_with_alpha(&self, alpha: Option<f64>) -> Result<ModulationFamily> {
        match self.modulation.family.as_str() {
            "sigmoid" => {
                ModulationFamily::sigmoid(alpha.unwrap_or(crate::modulation::DEFAULT_SIGMOID_ALPHA))
            }
            "entropy" => {
                ModulationFamily::entropy(alpha.unwrap_or(crate::modulation::DEFAULT_ENTROPY_ALPHA))
            }
            other => Err(Error::config(format!(
                "unknown modulation family `{other}` (expected sigmoid or entropy)"
            ))),
        }
    }

    pub fn variant(&self) -> Result<Variant> {
        Variant::parse(&self.model.variant)
    }

    pub fn cutoff(&self) -> Result<CutoffMode> {
        CutoffMode::parse(&self.framelet.cutoff)
    }

    pub fn merge(&self) -> Result<MergeMode> {
        MergeMode::parse(&self.model.merge)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.train.learning_rate,
            weight_decay: self.train.weight_decay,
            epochs: self.train.epochs,
            early_stop_patience: self.train.early_stop_patience,
            hidden_units: self.model.hidden,
            seed: self.train.seed,
            adam_beta1: self.train.adam_beta1,
            adam_beta2: self.train.adam_beta2,
            adam_epsilon: self.train.adam_epsilon,
            dropout_rate: self.train.dropout,
        }
    }

    /// Resolve the noise section into a concrete spec for one run.
    pub fn noise_spec_for(&self, noise: &NoiseSection, run_seed: u64) -> Result<NoiseSpec> {
        let seed = noise.seed.unwrap_or(run_seed);
        let level = match noise.scale.as_deref() {
            None | Some("raw") => noise.level,
            Some("percent") => noise.level / 100.0,
            Some(other) => {
                return Err(Error::config(format!(
                    "unknown noise scale `{other}` (expected raw or percent)"
                )))
            }
        };
        match noise.kind.as_str() {
            "binary" => Ok(NoiseSpec::Binary {
                rate: level,
                mode: match noise.binary_mode.as_deref() {
                    None => BinaryNoiseMode::Entry,
                    Some(m) => BinaryNoiseMode::parse(m)?,
                },
                seed,
            }),
            "gaussian" => Ok(NoiseSpec::Gaussian { sigma: level, seed }),
            "highfreq" => Ok(NoiseSpec::HighFrequency {
                count: noise
                    .freq_count
                    .ok_or_else(|| Error::config("high-frequency noise needs noise.freq_count"))?,
                level,
                seed,
            }),
            other => Err(Error::config(format!(
                "unknown noise kind `{other}` (expected binary, gaussian or highfreq)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[dataset]\nmanifest = \"m.toml\"\n";

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ExperimentConfig::from_str_for_tests(MINIMAL).unwrap();
        assert_eq!(cfg.model.hidden, 32);
        assert_eq!(cfg.chebyshev.degree, 3);
        assert_eq!(cfg.framelet.dilation, 2.0);
        assert!(cfg.noise.is_none());
        assert!(matches!(cfg.variant().unwrap(), Variant::ReluFilter));
    }

    #[test]
    fn unknown_keys_are_rejected_with_expectations() {
        let text = format!("{MINIMAL}\n[model]\nhiden = 16\n");
        let err = ExperimentConfig::from_str_for_tests(&text).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("hiden"));
        assert!(msg.contains("expected"));
    }

    #[test]
    fn bad_enum_values_are_config_errors() {
        for (section, line) in [
            ("[model]", "variant = \"softmax\""),
            ("[modulation]", "family = \"haar\""),
            ("[framelet]", "cutoff = \"half\""),
        ] {
            let text = format!("{MINIMAL}\n{section}\n{line}\n");
            assert!(
                ExperimentConfig::from_str_for_tests(&text).is_err(),
                "{section} {line}"
            );
        }
    }

    #[test]
    fn percent_scale_divides_level() {
        let text =
            format!("{MINIMAL}\n[noise]\nkind = \"gaussian\"\nlevel = 5.0\nscale = \"percent\"\n");
        let cfg = ExperimentConfig::from_str_for_tests(&text).unwrap();
        let spec = cfg.noise_spec_for(cfg.noise.as_ref().unwrap(), 1).unwrap();
        match spec {
            NoiseSpec::Gaussian { sigma, .. } => assert!((sigma - 0.05).abs() < 1e-15),
            _ => panic!("expected gaussian"),
        }
    }

    #[test]
    fn alpha_defaults_track_the_family() {
        let cfg = ExperimentConfig::from_str_for_tests(MINIMAL).unwrap();
        match cfg.family().unwrap() {
            ModulationFamily::Entropy { alpha } => assert_eq!(alpha, 0.75),
            other => panic!("unexpected family {other:?}"),
        }
        let text = format!("{MINIMAL}\n[modulation]\nfamily = \"sigmoid\"\n");
        let cfg = ExperimentConfig::from_str_for_tests(&text).unwrap();
        match cfg.family().unwrap() {
            ModulationFamily::Sigmoid { alpha } => assert_eq!(alpha, 20.0),
            other => panic!("unexpected family {other:?}"),
        }
    }
}
