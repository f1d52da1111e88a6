use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::construct::{ideal_scalar, map_embed, map_repeat};
use super::corrupt::{corrupt, CorruptionKind, CorruptionSpec};
use crate::metrics::{evaluate_all, EvalConfig, MetricsReport, RepresentationMatrix};
use crate::numerics::RngStream;
use crate::synthdata::{FactorGrid, Side, SplitMask};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Table2Config {
    /// Unit size of the ideal vector rows.
    pub vector_d: usize,
    /// Unit size used by the embed and repeat mappings.
    pub map_d: usize,
    pub embed_seed: u64,
    pub corruption: CorruptionSpec,
    pub max_train_rows: usize,
    pub max_test_rows: usize,
    pub eval: EvalConfig,
}

impl Default for Table2Config {
    fn default() -> Self {
        Table2Config {
            vector_d: 4,
            map_d: 4,
            embed_seed: 0,
            corruption: CorruptionSpec::default(),
            max_train_rows: 10_000,
            max_test_rows: 10_000,
            eval: EvalConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    IdealScalar,
    IdealVector,
    LearnedScalar,
    LearnedVector,
}

impl Section {
    pub fn name(self) -> &'static str {
        match self {
            Section::IdealScalar => "ideal_scalar",
            Section::IdealVector => "ideal_vector",
            Section::LearnedScalar => "learned_scalar",
            Section::LearnedVector => "learned_vector",
        }
    }
}

/// A trained scalar model's codes on both sides of the split.
#[derive(Clone, Debug)]
pub struct LearnedSource {
    pub name: String,
    pub train: RepresentationMatrix,
    pub test: RepresentationMatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table2Row {
    pub section: Section,
    pub method: String,
    pub report: MetricsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table2 {
    pub rows: Vec<Table2Row>,
}

struct Job {
    section: Section,
    method: String,
    train: RepresentationMatrix,
    test: RepresentationMatrix,
}

/// Ideal scalar and vector rows under every corruption, then for each
/// learned source its scalar row and its embed and repeat mappings. All rows
/// share `eval_seed`.
pub fn run_table2(
    grid: &FactorGrid,
    split: &SplitMask,
    sources: &[LearnedSource],
    cfg: &Table2Config,
    eval_seed: u64,
) -> Result<Table2> {
    if cfg.vector_d < 2 || cfg.map_d < 2 {
        return Err(Error::invalid("vector rows need a unit size of at least 2"));
    }
    let rows = RngStream::new(eval_seed).child("table2_rows");
    let train_t = split.sample_tuples(grid, Side::Train, cfg.max_train_rows, &mut rows.child("train"))?;
    let test_t = split.sample_tuples(grid, Side::Test, cfg.max_test_rows, &mut rows.child("test"))?;
    let s_train = ideal_scalar(grid, &train_t, Side::Train)?;
    let s_test = ideal_scalar(grid, &test_t, Side::Test)?;
    let v_train = map_embed(&s_train, cfg.vector_d, cfg.embed_seed)?;
    let v_test = map_embed(&s_test, cfg.vector_d, cfg.embed_seed)?;

    let mut jobs = Vec::new();
    for (section, tr, te) in [
        (Section::IdealScalar, &s_train, &s_test),
        (Section::IdealVector, &v_train, &v_test),
    ] {
        for kind in CorruptionKind::ALL {
            let (train, test) = corrupt(tr, te, &cfg.corruption.with_kind(kind))?;
            jobs.push(Job {
                section,
                method: kind.name().to_string(),
                train,
                test,
            });
        }
    }
    for s in sources {
        jobs.push(Job {
            section: Section::LearnedScalar,
            method: s.name.clone(),
            train: s.train.clone(),
            test: s.test.clone(),
        });
        jobs.push(Job {
            section: Section::LearnedVector,
            method: format!("{} embed", s.name),
            train: map_embed(&s.train, cfg.map_d, cfg.embed_seed)?,
            test: map_embed(&s.test, cfg.map_d, cfg.embed_seed)?,
        });
        jobs.push(Job {
            section: Section::LearnedVector,
            method: format!("{} repeat", s.name),
            train: map_repeat(&s.train, cfg.map_d)?,
            test: map_repeat(&s.test, cfg.map_d)?,
        });
    }

    let rows = jobs
        .into_par_iter()
        .map(|job| {
            log::info!("ideal-exp: {} / {}", job.section.name(), job.method);
            let report = evaluate_all(&job.train, &job.test, grid, &cfg.eval, eval_seed)?;
            Ok(Table2Row {
                section: job.section,
                method: job.method,
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Table2 { rows })
}

pub const TABLE2_COLUMNS: [&str; 8] = [
    "section",
    "method",
    "r2",
    "acc",
    "dci",
    "factor_vae_score",
    "mig",
    "beta_vae_score",
];

impl Table2 {
    pub fn row(&self, section: Section, method: &str) -> Option<&Table2Row> {
        self.rows.iter().find(|r| r.section == section && r.method == method)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TABLE2_COLUMNS)?;
        for r in &self.rows {
            let p = &r.report;
            let mut rec = vec![r.section.name().to_string(), r.method.clone()];
            rec.extend(
                [p.r2, p.acc, p.dci, p.factor_vae_score, p.mig, p.beta_vae_score]
                    .iter()
                    .map(|v| format!("{v:.4}")),
            );
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::LogisticConfig;
    use crate::synthdata::split_combinations;

    fn quick() -> Table2Config {
        Table2Config {
            max_train_rows: 300,
            max_test_rows: 300,
            eval: EvalConfig {
                n_label: 200,
                votes: 50,
                probe_batch: 16,
                beta_points: 50,
                beta_pairs_per_point: 8,
                logistic: LogisticConfig {
                    cs: vec![1.0],
                    folds: 2,
                    max_iter: 30,
                    ..LogisticConfig::default()
                },
                ..EvalConfig::default()
            },
            ..Table2Config::default()
        }
    }

    #[test]
    fn enumerates_ideal_and_mapped_rows() {
        let g = FactorGrid::from_cardinalities(&[10, 10, 8]).unwrap();
        let split = split_combinations(&g, (1, 1), 0).unwrap();
        let cfg = quick();
        let t = split.sample_tuples(&g, Side::Train, 300, &mut RngStream::new(1)).unwrap();
        let e = split.sample_tuples(&g, Side::Test, 300, &mut RngStream::new(2)).unwrap();
        let src = |name: &str| LearnedSource {
            name: name.into(),
            train: ideal_scalar(&g, &t, Side::Train).unwrap(),
            test: ideal_scalar(&g, &e, Side::Test).unwrap(),
        };
        let table = run_table2(&g, &split, &[src("a"), src("b")], &cfg, 4).unwrap();
        let count = |s: Section| table.rows.iter().filter(|r| r.section == s).count();
        assert_eq!(count(Section::IdealScalar) + count(Section::IdealVector), 8);
        assert_eq!(count(Section::LearnedVector), 4);
        assert_eq!(count(Section::LearnedScalar), 2);
        assert!(table.row(Section::LearnedVector, "b repeat").is_some());

        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 15);
        assert!(text.starts_with("section,method,r2,acc,dci"));
    }
}
