use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::run::RunRecord;
use crate::losses::Method;
use crate::metrics::METRIC_NAMES;
use crate::numerics::{mean, pearson_correlation, std_dev};
use crate::{Error, Result};

pub const DISENTANGLEMENT_METRICS: [&str; 2] = ["dci", "factor_vae_score"];
pub const GENERALIZATION_METRICS: [&str; 2] = ["acc", "r2"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    pub method: String,
    pub x_metric: String,
    pub y_metric: String,
    pub n: usize,
    /// `None` with fewer than three records or a constant metric.
    pub r: Option<f64>,
}

fn completed(records: &[RunRecord]) -> impl Iterator<Item = &RunRecord> {
    records.iter().filter(|r| r.is_completed() && r.report.is_some())
}

/// Pearson correlation between each x and y metric, per method, over
/// completed records.
pub fn correlation_report(records: &[RunRecord], x_metrics: &[&str], y_metrics: &[&str]) -> Result<Vec<CorrelationEntry>> {
    for name in x_metrics.iter().chain(y_metrics) {
        if !METRIC_NAMES.contains(name) {
            return Err(Error::invalid(format!("unknown metric {name:?}")));
        }
    }
    let mut groups: BTreeMap<Method, Vec<&RunRecord>> = BTreeMap::new();
    for r in completed(records) {
        groups.entry(r.config.method).or_default().push(r);
    }
    let mut out = Vec::new();
    for (method, rs) in &groups {
        for x in x_metrics {
            for y in y_metrics {
                let xs: Vec<f64> = rs.iter().filter_map(|r| r.metric(x)).collect();
                let ys: Vec<f64> = rs.iter().filter_map(|r| r.metric(y)).collect();
                let r = if rs.len() >= 3 { pearson_correlation(&xs, &ys).ok() } else { None };
                out.push(CorrelationEntry {
                    method: method.to_string(),
                    x_metric: x.to_string(),
                    y_metric: y.to_string(),
                    n: rs.len(),
                    r,
                });
            }
        }
    }
    Ok(out)
}

pub fn write_correlation_csv(entries: &[CorrelationEntry], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for e in entries {
        w.serialize(e)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean and population standard deviation of one metric over a group of
/// runs. Unused grouping keys are empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub d: Option<usize>,
    pub gamma: Option<f64>,
    pub split_ratio: Option<String>,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Copy)]
struct Keys {
    d: bool,
    gamma: bool,
    ratio: bool,
}

#[derive(Clone, Debug, PartialEq, PartialOrd)]
struct GroupKey {
    method: Method,
    d: Option<usize>,
    gamma: Option<f64>,
    ratio: Option<(u32, u32)>,
}

fn ratio_label((a, b): (u32, u32)) -> String {
    format!("{a}:{b}")
}

fn summarize(records: &[RunRecord], keys: Keys) -> Vec<SummaryRow> {
    let mut groups: Vec<(GroupKey, Vec<&RunRecord>)> = Vec::new();
    for r in completed(records) {
        let k = GroupKey {
            method: r.config.method,
            d: keys.d.then_some(r.config.d),
            gamma: keys.gamma.then_some(r.config.gamma),
            ratio: keys.ratio.then_some(r.split_ratio),
        };
        match groups.iter_mut().find(|(g, _)| *g == k) {
            Some((_, v)) => v.push(r),
            None => groups.push((k, vec![r])),
        }
    }
    groups.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut rows = Vec::new();
    for (k, rs) in groups {
        for metric in METRIC_NAMES {
            let vals: Vec<f64> = rs.iter().filter_map(|r| r.metric(metric)).collect();
            rows.push(SummaryRow {
                method: k.method.to_string(),
                d: k.d,
                gamma: k.gamma,
                split_ratio: k.ratio.map(ratio_label),
                metric: metric.to_string(),
                n: vals.len(),
                mean: mean(&vals),
                std: std_dev(&vals),
            });
        }
    }
    rows
}

/// Per (method, D, γ, split ratio) cell.
pub fn table1_rows(records: &[RunRecord]) -> Vec<SummaryRow> {
    summarize(records, Keys { d: true, gamma: true, ratio: true })
}

/// Per (method, D): metric against vector size.
pub fn metric_vs_d(records: &[RunRecord]) -> Vec<SummaryRow> {
    summarize(records, Keys { d: true, gamma: false, ratio: false })
}

/// Per (method, γ): metric against regularisation strength.
pub fn metric_vs_gamma(records: &[RunRecord]) -> Vec<SummaryRow> {
    summarize(records, Keys { d: false, gamma: true, ratio: false })
}

/// `"0.98 ± 0.01"`.
pub fn format_mean_std(mean: f64, std: f64) -> String {
    format!("{mean:.2} ± {std:.2}")
}

pub fn write_summary_csv(rows: &[SummaryRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_summary_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Markdown table with one line per cell and `mean ± std` per metric.
pub fn table1_markdown(rows: &[SummaryRow]) -> String {
    let mut cells: Vec<(String, Vec<&SummaryRow>)> = Vec::new();
    for r in rows {
        let key = format!(
            "| {} | {} | {} | {} |",
            r.method,
            r.d.map_or(String::new(), |d| d.to_string()),
            r.gamma.map_or(String::new(), |g| g.to_string()),
            r.split_ratio.clone().unwrap_or_default()
        );
        match cells.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r),
            None => cells.push((key, vec![r])),
        }
    }
    let mut s = String::from("| method | D | gamma | split | n |");
    for m in METRIC_NAMES {
        let _ = write!(s, " {m} |");
    }
    s.push_str("\n|---|---|---|---|---|");
    s.push_str(&"---|".repeat(METRIC_NAMES.len()));
    s.push('\n');
    for (key, rs) in cells {
        let n = rs.iter().map(|r| r.n).max().unwrap_or(0);
        let _ = write!(s, "{key} {n} |");
        for m in METRIC_NAMES {
            let cell = rs
                .iter()
                .find(|r| r.metric == m)
                .map_or(String::new(), |r| format_mean_std(r.mean, r.std));
            let _ = write!(s, " {cell} |");
        }
        s.push('\n');
    }
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportFiles {
    pub table1_csv: PathBuf,
    pub table1_md: PathBuf,
    pub vs_d_csv: PathBuf,
    pub vs_gamma_csv: PathBuf,
}

/// Write `table1.csv`, `table1.md`, `metric_vs_d.csv` and
/// `metric_vs_gamma.csv` under `out_dir`.
pub fn emit_report(records: &[RunRecord], out_dir: &Path) -> Result<ReportFiles> {
    if completed(records).next().is_none() {
        return Err(Error::invalid("no completed records to report"));
    }
    std::fs::create_dir_all(out_dir)?;
    let files = ReportFiles {
        table1_csv: out_dir.join("table1.csv"),
        table1_md: out_dir.join("table1.md"),
        vs_d_csv: out_dir.join("metric_vs_d.csv"),
        vs_gamma_csv: out_dir.join("metric_vs_gamma.csv"),
    };
    let t1 = table1_rows(records);
    write_summary_csv(&t1, &files.table1_csv)?;
    std::fs::write(&files.table1_md, table1_markdown(&t1))?;
    write_summary_csv(&metric_vs_d(records), &files.vs_d_csv)?;
    write_summary_csv(&metric_vs_gamma(records), &files.vs_gamma_csv)?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::run::RunStatus;
    use crate::losses::ModelConfig;
    use crate::metrics::MetricsReport;

    pub(crate) fn record(method: Method, d: usize, seed: u64, acc: f64, dci: f64) -> RunRecord {
        RunRecord {
            hash: format!("{method}-{d}-{seed}"),
            config: ModelConfig::new(method, d, 10.0, seed),
            split_ratio: (1, 9),
            split_seed: 0,
            eval_seed: 0,
            status: RunStatus::Completed,
            failed_step: None,
            error: None,
            report: Some(MetricsReport {
                r2: 0.5,
                acc,
                factor_vae_score: dci,
                dci,
                mig: 0.1,
                beta_vae_score: 0.9,
                dci_completeness: 0.0,
                dci_informativeness: 0.0,
                r2_per_factor: vec![],
                acc_per_factor: vec![],
                pca_status: vec![],
                eval_seed: 0,
                split_seed: None,
                config_hash: None,
            }),
            loss_curve: None,
            wall_time_s: 0.0,
        }
    }

    #[test]
    fn identical_metrics_correlate_perfectly() {
        let recs: Vec<RunRecord> = (0..5)
            .map(|s| record(Method::VecBetaTcvae, 4, s, 0.1 * s as f64, 0.1 * s as f64))
            .collect();
        let e = correlation_report(&recs, &["dci"], &["acc", "r2"]).unwrap();
        assert_eq!(e.len(), 2);
        assert!((e[0].r.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(e[1].r, None);
        assert!(correlation_report(&recs[..2], &["dci"], &["acc"]).unwrap()[0].r.is_none());
        assert!(correlation_report(&recs, &["bogus"], &["acc"]).is_err());
    }

    #[test]
    fn single_run_has_zero_std() {
        let rows = table1_rows(&[record(Method::VecFactorVae, 16, 0, 0.75, 0.5)]);
        let acc = rows.iter().find(|r| r.metric == "acc").unwrap();
        assert_eq!((acc.n, acc.std), (1, 0.0));
        assert_eq!(format_mean_std(acc.mean, acc.std), "0.75 ± 0.00");
        assert!(table1_markdown(&rows).contains("0.75 ± 0.00"));
    }

    #[test]
    fn groups_pool_over_seeds() {
        let recs = vec![
            record(Method::VecBetaTcvae, 1, 0, 0.2, 0.0),
            record(Method::VecBetaTcvae, 1, 1, 0.4, 0.0),
            record(Method::VecBetaTcvae, 16, 0, 0.9, 0.0),
        ];
        let rows = metric_vs_d(&recs);
        let acc: Vec<&SummaryRow> = rows.iter().filter(|r| r.metric == "acc").collect();
        assert_eq!(acc.len(), 2);
        assert_eq!((acc[0].d, acc[0].n), (Some(1), 2));
        assert!((acc[0].mean - 0.3).abs() < 1e-12);
        assert!((acc[0].std - 0.1).abs() < 1e-12);
        assert_eq!(acc[0].gamma, None);
    }

    #[test]
    fn empty_records_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_report(&[], dir.path()).is_err());
    }
}
