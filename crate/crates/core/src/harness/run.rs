use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::EvalSection;
use crate::digest::json_sha256;
use crate::idealrep::learned_representation;
use crate::losses::{train, LogRow, ModelConfig};
use crate::metrics::{evaluate_all, MetricsReport};
use crate::numerics::RngStream;
use crate::synthdata::{Dataset, DatasetConfig, Side};
use crate::{Error, Result};

/// Everything that determines a run's outcome. Its hash names the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub eval: EvalSection,
}

impl RunSpec {
    pub fn hash(&self) -> Result<String> {
        json_sha256(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Failed,
}

/// One line of the results file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub hash: String,
    pub config: ModelConfig,
    pub split_ratio: (u32, u32),
    pub split_seed: u64,
    pub eval_seed: u64,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_step: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<MetricsReport>,
    /// Relative to the output directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_curve: Option<String>,
    pub wall_time_s: f64,
}

impl RunRecord {
    pub fn is_completed(&self) -> bool {
        self.status == RunStatus::Completed
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.report.as_ref().and_then(|r| r.get(name))
    }

    /// The record as JSON without its wall time, for reproducibility checks.
    pub fn timeless_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(o) = v.as_object_mut() {
            o.remove("wall_time_s");
        }
        Ok(serde_json::to_string(&v)?)
    }
}

pub fn curve_path(hash: &str) -> String {
    format!("curves/{hash}.csv")
}

pub fn write_loss_curve(path: &Path, log: &[LogRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["step", "recon", "kl", "tc", "disc_acc"])?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for r in log {
        w.write_record([
            r.step.to_string(),
            r.recon.to_string(),
            r.kl.to_string(),
            opt(r.tc),
            opt(r.disc_acc),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Train, encode posterior means on subsampled train and test combinations,
/// and evaluate. Training and evaluation failures yield a failed record;
/// only an invalid spec or an unwritable curve file is an error. When
/// `out_dir` is given the loss curve is written under it.
pub fn run_experiment(spec: &RunSpec, dataset: &Dataset, out_dir: Option<&Path>) -> Result<RunRecord> {
    spec.model.validate()?;
    if dataset.grid() != &spec.dataset.grid
        || (dataset.split.ratio, dataset.split.seed) != (spec.dataset.split_ratio, spec.dataset.split_seed)
    {
        return Err(Error::invalid("dataset does not match the run spec"));
    }
    let hash = spec.hash()?;
    let start = Instant::now();
    let mut record = RunRecord {
        hash: hash.clone(),
        config: spec.model.clone(),
        split_ratio: spec.dataset.split_ratio,
        split_seed: spec.dataset.split_seed,
        eval_seed: spec.eval.eval_seed,
        status: RunStatus::Failed,
        failed_step: None,
        error: None,
        report: None,
        loss_curve: None,
        wall_time_s: 0.0,
    };
    match train(&spec.model, dataset, spec.eval.log_every) {
        Err(e) => {
            if let Error::Diverged { step, .. } = e {
                record.failed_step = Some(step);
            }
            log::warn!("run {hash} failed in training: {e}");
            record.error = Some(e.to_string());
        }
        Ok(outcome) => {
            if let Some(dir) = out_dir {
                let rel = curve_path(&hash);
                let path = dir.join(&rel);
                if let Some(parent) = path.parent() {
                    std::fs::create_dir_all(parent)?;
                }
                write_loss_curve(&path, &outcome.log)?;
                record.loss_curve = Some(rel);
            }
            match evaluate_model(spec, dataset, &outcome.model) {
                Ok(report) => {
                    record.status = RunStatus::Completed;
                    record.report = Some(report);
                }
                Err(e) => {
                    log::warn!("run {hash} failed in evaluation: {e}");
                    record.error = Some(e.to_string());
                }
            }
        }
    }
    record.wall_time_s = start.elapsed().as_secs_f64();
    Ok(record)
}

/// Metrics of a trained model under the spec's evaluation settings.
pub fn evaluate_model(spec: &RunSpec, dataset: &Dataset, model: &crate::losses::Model) -> Result<MetricsReport> {
    let ev = &spec.eval;
    let rows = RngStream::new(ev.eval_seed).child("rows");
    let grid = dataset.grid();
    let train_t = dataset
        .split
        .sample_tuples(grid, Side::Train, ev.max_train_rows, &mut rows.child("train"))?;
    let test_t = dataset
        .split
        .sample_tuples(grid, Side::Test, ev.max_test_rows, &mut rows.child("test"))?;
    let tr = learned_representation(model, &dataset.renderer, &train_t, Side::Train)?;
    let te = learned_representation(model, &dataset.renderer, &test_t, Side::Test)?;
    let mut report = evaluate_all(&tr, &te, grid, &ev.metrics, ev.eval_seed)?;
    report.split_seed = Some(spec.dataset.split_seed);
    report.config_hash = Some(spec.hash()?);
    Ok(report)
}
