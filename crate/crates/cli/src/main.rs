use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use disentlab::harness::{
    correlation_report, emit_report, evaluate_model, load_records, run_sweep, write_correlation_csv,
    write_loss_curve, ExperimentConfig, RunSpec, DISENTANGLEMENT_METRICS, GENERALIZATION_METRICS,
};
use disentlab::idealrep::{learned_representation, run_table2, LearnedSource, Table2Config};
use disentlab::losses::{train, Method, Model, ModelConfig};
use disentlab::neural::Checkpoint;
use disentlab::numerics::RngStream;
use disentlab::synthdata::{Dataset, DatasetConfig, Side};

#[derive(Parser)]
#[command(name = "disentlab", version, about = "Vector-based disentanglement lab")]
struct Cli {
    /// Experiment config (TOML, or JSON by extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render the synthetic dataset and its split to a directory.
    GenData {
        #[arg(long, env = "DISENTLAB_DATA_DIR")]
        out: PathBuf,
    },
    /// Train one model from the [model] section.
    Train {
        #[arg(long, env = "DISENTLAB_DATA_DIR")]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a directory written by `train`.
    Eval {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, env = "DISENTLAB_DATA_DIR")]
        data: Option<PathBuf>,
        /// Report path; defaults to `<run>/report.json`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the [sweep] grid, resuming from `<out>/results.jsonl`.
    Sweep {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        force: bool,
        /// Base seed for split and model seeds.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Ideal, corrupted and mapped representations.
    IdealExp {
        #[arg(long, env = "DISENTLAB_DATA_DIR")]
        data: Option<PathBuf>,
        #[arg(long, default_value = "table2.csv")]
        out: PathBuf,
        /// TC weight of the two scalar source models.
        #[arg(long, default_value_t = 10.0)]
        gamma: f64,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Summary tables from a results file.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-method Pearson correlation of disentanglement and generalisation.
    Correlate {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, default_value = "correlation.csv")]
        out: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading {}", p.display())),
        None => Ok(ExperimentConfig::default()),
    }
}

/// The exported dataset at `data` when given, else one built from the
/// config. The config's dataset section is updated to match.
fn dataset(cfg: &mut ExperimentConfig, data: Option<&Path>) -> Result<Dataset> {
    let ds = match data {
        Some(dir) if dir.join(disentlab::synthdata::export::OBSERVATIONS_FILE).exists() => {
            Dataset::load(dir).with_context(|| format!("loading dataset from {}", dir.display()))?
        }
        Some(dir) => bail!("{} holds no dataset; run gen-data first", dir.display()),
        None => Dataset::build(&cfg.dataset)?,
    };
    cfg.dataset = DatasetConfig {
        grid: ds.grid().clone(),
        observation: ds.renderer.spec().clone(),
        split_ratio: ds.split.ratio,
        split_seed: ds.split.seed,
    };
    Ok(ds)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let mut cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::GenData { out } => {
            let ds = Dataset::build(&cfg.dataset)?;
            let h = ds.export(&out)?;
            println!(
                "wrote {} rows of dimension {} to {} ({} train / {} test combinations)",
                h.n_rows,
                h.d_x,
                out.display(),
                h.split.n_train,
                h.split.n_test
            );
        }
        Command::Train { data, out, seed } => {
            let ds = dataset(&mut cfg, data.as_deref())?;
            if let Some(s) = seed {
                cfg.model.seed = s;
            }
            std::fs::create_dir_all(&out)?;
            let outcome = train(&cfg.model, &ds, cfg.eval.log_every)?;
            outcome.model.to_checkpoint().save(&out.join("model.ckpt"))?;
            write_loss_curve(&out.join("loss.csv"), &outcome.log)?;
            let spec = RunSpec {
                dataset: cfg.dataset.clone(),
                model: cfg.model.clone(),
                eval: cfg.eval.clone(),
            };
            write_json(&out.join("run.json"), &spec)?;
            if let Some(last) = outcome.log.last() {
                println!(
                    "step {}: recon {:.4} kl {:.4} tc {}",
                    last.step,
                    last.recon,
                    last.kl,
                    last.tc.map_or("-".into(), |t| format!("{t:.4}"))
                );
            }
        }
        Command::Eval { run, data, out, seed } => {
            let text = std::fs::read_to_string(run.join("run.json")).context("reading run.json")?;
            let mut spec: RunSpec = serde_json::from_str(&text)?;
            if cli.config.is_some() {
                spec.eval = cfg.eval.clone();
            }
            if let Some(s) = seed {
                spec.eval.eval_seed = s;
            }
            let ds = match data {
                Some(_) => dataset(&mut cfg, data.as_deref())?,
                None => Dataset::build(&spec.dataset)?,
            };
            let ck = Checkpoint::load(&run.join("model.ckpt"))?;
            let model = Model::from_checkpoint(spec.model.clone(), ds.renderer.d_x(), &ck)?;
            let report = evaluate_model(&spec, &ds, &model)?;
            let out = out.unwrap_or_else(|| run.join("report.json"));
            write_json(&out, &report)?;
            println!(
                "R2 {:.3}  ACC {:.3}  FactorVAE {:.3}  DCI {:.3}  MIG {:.3}  beta-VAE {:.3}",
                report.r2, report.acc, report.factor_vae_score, report.dci, report.mig, report.beta_vae_score
            );
        }
        Command::Sweep {
            out,
            workers,
            force,
            seed,
        } => {
            if let Some(s) = seed {
                cfg.sweep.seed = s;
            }
            let records = run_sweep(&cfg, &out, workers, force)?;
            let failed = records.iter().filter(|r| !r.is_completed()).count();
            println!("{} runs, {} failed; results in {}", records.len(), failed, out.display());
        }
        Command::IdealExp {
            data,
            out,
            gamma,
            seed,
        } => {
            let ds = dataset(&mut cfg, data.as_deref())?;
            let eval_seed = seed.unwrap_or(cfg.eval.eval_seed);
            let rows = RngStream::new(eval_seed).child("sources");
            let grid = ds.grid();
            let train_t = ds
                .split
                .sample_tuples(grid, Side::Train, cfg.eval.max_train_rows, &mut rows.child("train"))?;
            let test_t = ds
                .split
                .sample_tuples(grid, Side::Test, cfg.eval.max_test_rows, &mut rows.child("test"))?;
            let mut sources = Vec::new();
            for (method, name) in [(Method::BetaTcvae, "beta_tcvae"), (Method::FactorVae, "factor_vae")] {
                let mc = ModelConfig {
                    method,
                    d: 1,
                    gamma,
                    ..cfg.model.clone()
                };
                log::info!("training {name} for {} steps", mc.steps);
                let model = train(&mc, &ds, cfg.eval.log_every)?.model;
                sources.push(LearnedSource {
                    name: name.into(),
                    train: learned_representation(&model, &ds.renderer, &train_t, Side::Train)?,
                    test: learned_representation(&model, &ds.renderer, &test_t, Side::Test)?,
                });
            }
            let t2 = Table2Config {
                max_train_rows: cfg.eval.max_train_rows,
                max_test_rows: cfg.eval.max_test_rows,
                eval: cfg.eval.metrics.clone(),
                ..Table2Config::default()
            };
            let table = run_table2(grid, &ds.split, &sources, &t2, eval_seed)?;
            table.save_csv(&out)?;
            table.write_csv(std::io::stdout())?;
        }
        Command::Report { results, out } => {
            let records = load_records(&results)?;
            let files = emit_report(&records, &out)?;
            print!("{}", std::fs::read_to_string(&files.table1_md)?);
        }
        Command::Correlate { results, out } => {
            let records = load_records(&results)?;
            let entries = correlation_report(&records, &DISENTANGLEMENT_METRICS, &GENERALIZATION_METRICS)?;
            write_correlation_csv(&entries, &out)?;
            for e in &entries {
                let r = e.r.map_or("undefined".to_string(), |r| format!("{r:.3}"));
                println!("{:<16} {:>16} vs {:<4} n={:<4} r={r}", e.method, e.x_metric, e.y_metric, e.n);
            }
        }
    }
    Ok(())
}
