use serde::{Deserialize, Serialize};

use super::beta_vae::{beta_vae_score, DEFAULT_PAIRS, DEFAULT_PAIRS_PER_POINT};
use super::compgen::{comp_gen_eval, DEFAULT_N_LABEL};
use super::dci::dci;
use super::factor_vae::{factor_vae_score, DEFAULT_PROBE_BATCH, DEFAULT_VOTES};
use super::forest::ForestConfig;
use super::logistic::LogisticConfig;
use super::mig::{mig, DEFAULT_MIG_BINS};
use super::rep::{pca_postprocess, RepresentationMatrix};
use super::ridge::DEFAULT_ALPHAS;
use crate::numerics::{PcaStatus, RngStream};
use crate::synthdata::FactorGrid;
use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub n_label: usize,
    pub alphas: Vec<f64>,
    pub logistic: LogisticConfig,
    pub votes: usize,
    pub probe_batch: usize,
    pub mig_bins: usize,
    pub beta_points: usize,
    pub beta_pairs_per_point: usize,
    pub forest: ForestConfig,
    /// Test rows used by the disentanglement metrics; 0 keeps all.
    pub max_eval_rows: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            n_label: DEFAULT_N_LABEL,
            alphas: DEFAULT_ALPHAS.to_vec(),
            logistic: LogisticConfig::default(),
            votes: DEFAULT_VOTES,
            probe_batch: DEFAULT_PROBE_BATCH,
            mig_bins: DEFAULT_MIG_BINS,
            beta_points: DEFAULT_PAIRS,
            beta_pairs_per_point: DEFAULT_PAIRS_PER_POINT,
            forest: ForestConfig::default(),
            max_eval_rows: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub r2: f64,
    pub acc: f64,
    pub factor_vae_score: f64,
    pub dci: f64,
    pub mig: f64,
    pub beta_vae_score: f64,
    pub dci_completeness: f64,
    pub dci_informativeness: f64,
    pub r2_per_factor: Vec<Option<f64>>,
    pub acc_per_factor: Vec<Option<f64>>,
    pub pca_status: Vec<PcaStatus>,
    pub eval_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl MetricsReport {
    /// Value of a metric by its column name.
    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "r2" => self.r2,
            "acc" => self.acc,
            "factor_vae_score" | "factor_vae" => self.factor_vae_score,
            "dci" => self.dci,
            "mig" => self.mig,
            "beta_vae_score" | "beta_vae" => self.beta_vae_score,
            _ => return None,
        })
    }
}

pub const METRIC_NAMES: [&str; 6] = ["r2", "acc", "factor_vae_score", "dci", "mig", "beta_vae_score"];

/// R² and ACC on the raw codes; the disentanglement scores on the
/// PCA-postprocessed test side (subsampled to `max_eval_rows`).
pub fn evaluate_all(
    train: &RepresentationMatrix,
    test: &RepresentationMatrix,
    grid: &FactorGrid,
    cfg: &EvalConfig,
    eval_seed: u64,
) -> Result<MetricsReport> {
    let root = RngStream::new(eval_seed);
    let cg = comp_gen_eval(
        train,
        test,
        grid,
        cfg.n_label,
        &cfg.alphas,
        &cfg.logistic,
        &mut root.child("comp_gen"),
    )?;
    let (_, test_p, pca_status) = pca_postprocess(train, test)?;
    let pool = if cfg.max_eval_rows > 0 && test_p.len() > cfg.max_eval_rows {
        let mut idx = root.child("eval_rows").permutation(test_p.len());
        idx.truncate(cfg.max_eval_rows);
        idx.sort_unstable();
        test_p.select(&idx)
    } else {
        test_p
    };
    let fv = factor_vae_score(&pool, grid, cfg.votes, cfg.probe_batch, &mut root.child("factor_vae"))?;
    let d = dci(&pool, grid, &cfg.forest, &mut root.child("dci"))?;
    let mg = mig(&pool, cfg.mig_bins)?;
    let bv = beta_vae_score(
        &pool,
        grid,
        cfg.beta_points,
        cfg.beta_pairs_per_point,
        &cfg.logistic,
        &mut root.child("beta_vae"),
    )?;
    Ok(MetricsReport {
        r2: cg.r2,
        acc: cg.acc,
        factor_vae_score: fv,
        dci: d.disentanglement,
        mig: mg,
        beta_vae_score: bv,
        dci_completeness: d.completeness,
        dci_informativeness: d.informativeness,
        r2_per_factor: cg.r2_per_factor,
        acc_per_factor: cg.acc_per_factor,
        pca_status,
        eval_seed,
        split_seed: None,
        config_hash: None,
    })
}
