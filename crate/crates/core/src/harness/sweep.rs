use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;

use super::config::{EvalSection, ExperimentConfig, SweepSpec};
use super::run::{run_experiment, RunRecord, RunSpec};
use crate::losses::ModelConfig;
use crate::synthdata::{split_combinations, Dataset, DatasetConfig, Renderer};
use crate::{Error, Result};

pub const RESULTS_FILE: &str = "results.jsonl";

/// Expand the sweep into run specs in a fixed order: ratio, split seed,
/// method, D, γ, model seed.
pub fn expand_sweep(
    sweep: &SweepSpec,
    dataset: &DatasetConfig,
    model: &ModelConfig,
    eval: &EvalSection,
) -> Result<Vec<RunSpec>> {
    sweep.validate()?;
    let mut specs = Vec::with_capacity(sweep.total_runs());
    for &ratio in &sweep.split_ratios {
        for s in 0..sweep.split_seeds as u64 {
            let ds = DatasetConfig {
                split_ratio: ratio,
                split_seed: sweep.seed + s,
                ..dataset.clone()
            };
            for &method in &sweep.methods {
                for &d in &sweep.d_grid {
                    for &gamma in &sweep.gamma_grid {
                        for j in 0..sweep.model_seeds as u64 {
                            let m = ModelConfig {
                                method,
                                d,
                                gamma,
                                seed: sweep.seed + j,
                                ..model.clone()
                            };
                            m.validate()?;
                            specs.push(RunSpec {
                                dataset: ds.clone(),
                                model: m,
                                eval: eval.clone(),
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(specs)
}

/// Append-only JSONL file; each record is written with one locked
/// `write_all` of a complete line.
pub struct ResultsStore {
    path: PathBuf,
    file: Mutex<File>,
}

impl ResultsStore {
    /// Open for appending. An unterminated last line left by an interrupted
    /// write is cut off first.
    pub fn open(path: &Path) -> Result<Self> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        if path.exists() {
            let bytes = std::fs::read(path)?;
            if bytes.last().is_some_and(|&b| b != b'\n') {
                let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
                log::warn!("dropping {} bytes of an unterminated line in {}", bytes.len() - keep, path.display());
                OpenOptions::new().write(true).open(path)?.set_len(keep as u64)?;
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(ResultsStore {
            path: path.to_path_buf(),
            file: Mutex::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, record: &RunRecord) -> Result<()> {
        let mut line = serde_json::to_string(record)?;
        line.push('\n');
        let mut f = self.file.lock().unwrap_or_else(|p| p.into_inner());
        f.write_all(line.as_bytes())?;
        f.flush()?;
        Ok(())
    }
}

/// Every record in file order. A truncated final line from an interrupted
/// write is skipped; malformed lines elsewhere are errors.
pub fn load_records(path: &Path) -> Result<Vec<RunRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>()?;
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => out.push(r),
            Err(e) if i + 1 == lines.len() => log::warn!("skipping truncated last line of {}: {e}", path.display()),
            Err(e) => return Err(Error::Format(format!("{} line {}: {e}", path.display(), i + 1))),
        }
    }
    Ok(out)
}

/// The last record per hash.
pub fn latest_by_hash(records: Vec<RunRecord>) -> HashMap<String, RunRecord> {
    records.into_iter().map(|r| (r.hash.clone(), r)).collect()
}

/// Run every spec of the sweep not already completed in
/// `out_dir/results.jsonl` (all of them with `force`), using up to `workers`
/// threads. Returns the latest record of each spec in expansion order.
pub fn run_sweep(cfg: &ExperimentConfig, out_dir: &Path, workers: usize, force: bool) -> Result<Vec<RunRecord>> {
    let specs = expand_sweep(&cfg.sweep, &cfg.dataset, &cfg.model, &cfg.eval)?;
    let hashes = specs.iter().map(RunSpec::hash).collect::<Result<Vec<_>>>()?;
    if hashes.iter().collect::<HashSet<_>>().len() != hashes.len() {
        return Err(Error::Config("sweep contains duplicate runs".into()));
    }
    std::fs::create_dir_all(out_dir)?;
    let results = out_dir.join(RESULTS_FILE);
    let done: HashSet<String> = if results.exists() && !force {
        load_records(&results)?
            .into_iter()
            .filter(RunRecord::is_completed)
            .map(|r| r.hash)
            .collect()
    } else {
        HashSet::new()
    };
    let pending: Vec<&RunSpec> = specs
        .iter()
        .zip(&hashes)
        .filter(|(_, h)| !done.contains(*h))
        .map(|(s, _)| s)
        .collect();
    log::info!(
        "sweep: {} runs, {} already completed, {} to run on {} workers",
        specs.len(),
        specs.len() - pending.len(),
        pending.len(),
        workers
    );

    if !pending.is_empty() {
        let renderer = Renderer::new(cfg.dataset.grid.clone(), cfg.dataset.observation.clone())?;
        let mut datasets: BTreeMap<((u32, u32), u64), Dataset> = BTreeMap::new();
        for s in &pending {
            let key = (s.dataset.split_ratio, s.dataset.split_seed);
            if let std::collections::btree_map::Entry::Vacant(slot) = datasets.entry(key) {
                slot.insert(Dataset {
                    renderer: renderer.clone(),
                    split: split_combinations(&s.dataset.grid, key.0, key.1)?,
                });
            }
        }
        let store = ResultsStore::open(&results)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        pool.install(|| {
            pending.par_iter().try_for_each(|spec| -> Result<()> {
                let ds = &datasets[&(spec.dataset.split_ratio, spec.dataset.split_seed)];
                let record = run_experiment(spec, ds, Some(out_dir))?;
                log::info!(
                    "{} {} d={} gamma={} seed={}: {:?} in {:.1}s",
                    &record.hash[..12],
                    record.config.method,
                    record.config.d,
                    record.config.gamma,
                    record.config.seed,
                    record.status,
                    record.wall_time_s
                );
                store.append(&record)
            })
        })?;
    }

    let mut latest = latest_by_hash(load_records(&results)?);
    hashes
        .iter()
        .map(|h| {
            latest
                .remove(h)
                .ok_or_else(|| Error::Format(format!("run {h} missing from {}", results.display())))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::Method;

    #[test]
    fn hashes_are_unique_over_a_full_grid() {
        let sweep = SweepSpec {
            methods: vec![Method::VecBetaTcvae, Method::VecFactorVae],
            d_grid: vec![1, 2, 4, 8, 16, 24, 32, 64],
            gamma_grid: vec![0.1, 1.0, 2.0, 4.0, 5.0, 10.0, 20.0],
            split_ratios: vec![(3, 7), (1, 9), (5, 95)],
            split_seeds: 3,
            model_seeds: 5,
            seed: 0,
        };
        let specs = expand_sweep(
            &sweep,
            &DatasetConfig::default(),
            &ModelConfig::default(),
            &EvalSection::default(),
        )
        .unwrap();
        assert_eq!(specs.len(), sweep.total_runs());
        let hashes: HashSet<String> = specs.iter().map(|s| s.hash().unwrap()).collect();
        assert_eq!(hashes.len(), specs.len());
    }

    #[test]
    fn truncated_tail_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.jsonl");
        let rec = RunRecord {
            hash: "h".into(),
            config: ModelConfig::default(),
            split_ratio: (1, 9),
            split_seed: 0,
            eval_seed: 0,
            status: super::super::run::RunStatus::Failed,
            failed_step: Some(3),
            error: Some("x".into()),
            report: None,
            loss_curve: None,
            wall_time_s: 1.5,
        };
        let store = ResultsStore::open(&p).unwrap();
        store.append(&rec).unwrap();
        store.append(&rec).unwrap();
        std::fs::OpenOptions::new()
            .append(true)
            .open(&p)
            .unwrap()
            .write_all(b"{\"hash\":")
            .unwrap();
        assert_eq!(load_records(&p).unwrap(), vec![rec.clone(), rec.clone()]);
        let store = ResultsStore::open(&p).unwrap();
        store.append(&rec).unwrap();
        assert_eq!(load_records(&p).unwrap().len(), 3);
        std::fs::write(&p, "garbage\n{}\n").unwrap();
        assert!(load_records(&p).is_err());
    }
}
