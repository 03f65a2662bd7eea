//! Run configuration: a TOML file selecting data handling, model
//! architecture, and training hyperparameters. Command-line flags
//! override file values.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use tnq_core::circuit::{GateSet, MeraLayout};
use tnq_core::encode::PixelSelection;
use tnq_core::train::{Model, ModelArch, ModelOptions, QuantumArch, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct DataConfig {
    /// Dataset file consumed by train/eval/roc.
    pub dataset: Option<PathBuf>,
    /// Apply flip/standardize/crop/pool before feature extraction.
    pub preprocess: bool,
    pub crop: usize,
    pub pool: usize,
    /// Images used to fit the intensity scaler.
    pub n_fit: usize,
    pub selection: PixelSelection,
    /// Train/validation/test fractions; must sum to 1.
    pub split: [f64; 3],
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            preprocess: true,
            crop: 0,
            pool: 1,
            n_fit: 1000,
            selection: PixelSelection::Central4Top2,
            split: [0.8, 0.1, 0.1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct ModelConfig {
    pub arch: ModelArch,
    pub n_sites: usize,
    pub phys_dim: usize,
    pub bond_dim: usize,
    pub gate_set: GateSet,
    pub quantum_arch: QuantumArch,
    pub mera_layout: MeraLayout,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let options = ModelOptions::default();
        Self {
            arch: ModelArch::Qmps,
            n_sites: options.n_sites,
            phys_dim: options.phys_dim,
            bond_dim: options.bond_dim,
            gate_set: options.gate_set,
            quantum_arch: options.quantum_arch,
            mera_layout: options.mera_layout,
        }
    }
}

impl ModelConfig {
    pub fn options(&self) -> ModelOptions {
        ModelOptions {
            n_sites: self.n_sites,
            phys_dim: self.phys_dim,
            bond_dim: self.bond_dim,
            gate_set: self.gate_set,
            quantum_arch: self.quantum_arch,
            mera_layout: self.mera_layout,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed for generation, splitting, and initialization.
    pub seed: u64,
    /// Worker threads; 1 keeps results bit-reproducible.
    pub threads: usize,
    /// Output directory for artifacts.
    pub out: Option<PathBuf>,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn from_str(text: &str) -> Result<RunConfig, String> {
        let mut config: RunConfig =
            toml::from_str(text).map_err(|e| format!("config: {e}"))?;
        if config.threads == 0 {
            config.threads = 1;
        }
        Ok(config)
    }

    /// Collects one message per violated field so a bad file reports
    /// everything at once.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut problems = Vec::new();
        let split_sum: f64 = self.data.split.iter().sum();
        if self.data.split.iter().any(|f| *f < 0.0 || !f.is_finite()) {
            problems.push("data.split: fractions must be non-negative".to_string());
        } else if (split_sum - 1.0).abs() > 1e-9 {
            problems.push(format!("data.split: fractions sum to {split_sum}, expected 1"));
        }
        if self.data.preprocess && self.data.pool == 0 {
            problems.push("data.pool: pooling window must be at least 1".to_string());
        }
        if self.data.preprocess && self.data.n_fit == 0 {
            problems.push("data.n-fit: scaler needs at least one image".to_string());
        }
        if self.model.phys_dim < 2 {
            problems.push(format!(
                "model.phys-dim: hypersphere features need at least 2, got {}",
                self.model.phys_dim
            ));
        }
        if self.model.bond_dim < 1 {
            problems.push("model.bond-dim: must be at least 1".to_string());
        }
        if let Err(e) = Model::build(self.model.arch, &self.model.options()) {
            problems.push(format!("model: {e}"));
        }
        if let Err(e) = self.train.validate() {
            problems.push(format!("train: {e}"));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn parses_nested_toml() {
        let config = RunConfig::from_str(
            r#"
            seed = 9
            [data]
            dataset = "events.tnqc"
            crop = 12
            pool = 2
            selection = "central4"
            split = [0.6, 0.2, 0.2]
            [model]
            arch = "hybrid-ttn"
            bond-dim = 3
            quantum-arch = "qmera"
            [train]
            batch-size = 25
            lr-quantum = 0.05
            "#,
        )
        .unwrap();
        assert_eq!(config.seed, 9);
        assert_eq!(config.data.selection, PixelSelection::Central4);
        assert_eq!(config.model.arch, ModelArch::HybridTtn);
        assert_eq!(config.model.bond_dim, 3);
        assert_eq!(config.model.quantum_arch, QuantumArch::Qmera);
        assert_eq!(config.train.batch_size, 25);
        assert_eq!(config.train.lr_classical, 1e-4);
        config.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_str("sede = 1").is_err());
        assert!(RunConfig::from_str("[data]\ncropp = 2").is_err());
    }

    #[test]
    fn validation_lists_every_violation() {
        let config = RunConfig::from_str(
            r#"
            [data]
            split = [0.5, 0.2, 0.2]
            [model]
            phys-dim = 1
            [train]
            batch-size = 0
            decay-factor = 2.0
            "#,
        )
        .unwrap();
        let problems = config.validate().unwrap_err();
        let text = problems.join("; ");
        for needle in ["data.split", "model.phys-dim", "batch_size", "decay_factor"] {
            assert!(text.contains(needle), "missing {needle} in {text}");
        }
    }

    #[test]
    fn architecture_errors_surface_in_validation() {
        // The dense condenser/disentangler network is only defined for
        // four or six sites.
        let config = RunConfig::from_str("[model]\narch = \"mera\"\nn-sites = 10").unwrap();
        let problems = config.validate().unwrap_err();
        assert!(problems.iter().any(|p| p.starts_with("model:")), "{problems:?}");
    }
}
