use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::losses::{Method, ModelConfig};
use crate::metrics::EvalConfig;
use crate::synthdata::DatasetConfig;
use crate::{Error, Result};

/// How trained models are turned into representations and scored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSection {
    pub eval_seed: u64,
    /// Training combinations encoded for the probes; 0 keeps all.
    pub max_train_rows: usize,
    /// Test combinations encoded for evaluation; 0 keeps all.
    pub max_test_rows: usize,
    /// Loss-curve resolution in steps.
    pub log_every: usize,
    pub metrics: EvalConfig,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            eval_seed: 0,
            max_train_rows: 10_000,
            max_test_rows: 10_000,
            log_every: 100,
            metrics: EvalConfig::default(),
        }
    }
}

/// Cartesian grid of runs. Split seeds are `seed..seed+split_seeds` and
/// model seeds `seed..seed+model_seeds`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSpec {
    pub methods: Vec<Method>,
    pub d_grid: Vec<usize>,
    pub gamma_grid: Vec<f64>,
    pub split_ratios: Vec<(u32, u32)>,
    pub split_seeds: usize,
    pub model_seeds: usize,
    pub seed: u64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            methods: vec![Method::VecBetaTcvae, Method::VecFactorVae],
            d_grid: vec![1, 2, 16],
            gamma_grid: vec![10.0],
            split_ratios: vec![(1, 9)],
            split_seeds: 3,
            model_seeds: 5,
            seed: 0,
        }
    }
}

impl SweepSpec {
    pub fn total_runs(&self) -> usize {
        self.methods.len()
            * self.d_grid.len()
            * self.gamma_grid.len()
            * self.split_ratios.len()
            * self.split_seeds
            * self.model_seeds
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_runs() == 0 {
            return Err(Error::Config("sweep has an empty axis".into()));
        }
        for &m in &self.methods {
            if !m.is_vector() && self.d_grid.iter().any(|&d| d != 1) {
                return Err(Error::Config(format!(
                    "{m} only supports d = 1; sweep it separately or use its vector variant"
                )));
            }
        }
        Ok(())
    }
}

/// A whole experiment document with `[dataset]`, `[model]`, `[sweep]` and
/// `[eval]` sections. Missing fields take their defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub sweep: SweepSpec,
    pub eval: EvalSection,
}

impl ExperimentConfig {
    /// TOML, or JSON when the file ends in `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Ok(serde_json::from_str(&text)?)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_default() {
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn sections_override_defaults() {
        let c = ExperimentConfig::from_toml(
            r#"
            [dataset]
            split_ratio = [3, 7]
            [model]
            method = "vec_beta_tcvae"
            d = 8
            steps = 50
            [sweep]
            methods = ["vec_factor_vae"]
            d_grid = [4]
            [eval]
            eval_seed = 9
            [eval.metrics]
            votes = 10
            "#,
        )
        .unwrap();
        assert_eq!(c.dataset.split_ratio, (3, 7));
        assert_eq!((c.model.method, c.model.d, c.model.steps, c.model.m), (Method::VecBetaTcvae, 8, 50, 10));
        assert_eq!(c.sweep.d_grid, vec![4]);
        assert_eq!(c.sweep.model_seeds, 5);
        assert_eq!((c.eval.eval_seed, c.eval.metrics.votes), (9, 10));
        assert!(ExperimentConfig::from_toml("[model]\nmethod = \"pca\"").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);
    }

    #[test]
    fn run_count_is_the_product() {
        let s = SweepSpec {
            methods: vec![Method::VecBetaTcvae, Method::VecFactorVae],
            d_grid: vec![1, 4],
            gamma_grid: vec![1.0],
            split_ratios: vec![(1, 9)],
            split_seeds: 1,
            model_seeds: 2,
            seed: 0,
        };
        assert_eq!(s.total_runs(), 8);
        assert!(s.validate().is_ok());
        let bad = SweepSpec {
            methods: vec![Method::BetaTcvae],
            ..s
        };
        assert!(bad.validate().is_err());
    }
}
