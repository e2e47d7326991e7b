use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use multigroup::attacks::AttackSpec;
use multigroup::boost::{boost, BoostConfig};
use multigroup::domain::{Dataset, GroupClass, Predictor, Schema};
use multigroup::harness::{run_experiment, synthesize, theory_probes, DataSource, ExperimentConfig, SyntheticSpec};
use multigroup::io::{load_dataset, load_dataset_with_schema, load_predictions, save_dataset, save_predictions};
use multigroup::learners::{fit, ExternalPredictions, LearnerSpec};
use multigroup::metrics::{default_gamma_grid, group_reports, optimize_gamma};
use multigroup::{Error, Result};

#[derive(Parser)]
#[command(name = "multigroup", version, about = "Multiaccuracy post-processing and corruption experiments")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the seed of the step being run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset as CSV.
    Synth {
        /// Row count, overriding the config.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Fit a base learner and write its predictions as a `prediction` CSV.
    Fit {
        /// Training CSV.
        #[arg(long)]
        data: PathBuf,
        /// Rows to predict; the training CSV when omitted.
        #[arg(long)]
        predict: Option<PathBuf>,
        /// Learner name from the config; the first learner when omitted.
        #[arg(long)]
        learner: Option<String>,
    },
    /// Boost row-aligned base predictions; writes the trace as JSON lines.
    Boost {
        #[arg(long)]
        data: PathBuf,
        /// Base predictions for `--data`.
        #[arg(long)]
        base: PathBuf,
        /// Extra rows to score with the boosted predictor.
        #[arg(long, requires = "eval_base")]
        predict: Option<PathBuf>,
        /// Base predictions for `--predict`.
        #[arg(long)]
        eval_base: Option<PathBuf>,
        /// Where to write boosted predictions for `--predict` (or `--data`).
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Overrides the config epsilon.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Corrupt a training CSV with the configured attack at one level.
    Attack {
        #[arg(long)]
        data: PathBuf,
        /// Auxiliary CSV for data addition.
        #[arg(long)]
        aux: Option<PathBuf>,
        #[arg(long)]
        level: f64,
    },
    /// Per-group accuracy and MA-err of row-aligned predictions, as JSON lines.
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// Decision threshold; optimized on `--validation` when omitted.
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, requires = "validation_predictions")]
        validation: Option<PathBuf>,
        #[arg(long)]
        validation_predictions: Option<PathBuf>,
    },
    /// Run the full experiment described by the config.
    Experiment,
    /// Run the theory probes and print a JSON report.
    Probe,
}

fn config(global: &Global) -> Result<ExperimentConfig> {
    let path = global.config.as_ref().ok_or_else(|| Error::Config("--config is required for this command".into()))?;
    ExperimentConfig::load(path)
}

fn output(global: &Global) -> Result<Box<dyn Write>> {
    Ok(match &global.out {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::io(p, e))?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn finish(mut w: Box<dyn Write>) -> Result<()> {
    w.flush().map_err(|e| Error::io("<output>", e))
}

fn label_column(cfg: &ExperimentConfig) -> &str {
    match &cfg.data.source {
        DataSource::Csv { label, .. } => label,
        DataSource::Synthetic(spec) => &spec.label,
    }
}

fn learner<'a>(cfg: &'a ExperimentConfig, name: Option<&str>) -> Result<&'a LearnerSpec> {
    match name {
        None => Ok(&cfg.learners[0]),
        Some(n) => cfg
            .learners
            .iter()
            .find(|l| l.name() == n)
            .ok_or_else(|| Error::Config(format!("no learner named `{n}` in the config"))),
    }
}

fn groups_for(cfg: &ExperimentConfig, schema: &Schema) -> Result<GroupClass> {
    GroupClass::parse(&cfg.data.groups, schema)
}

fn other(path: &Path, train: &Dataset) -> Result<Dataset> {
    load_dataset_with_schema(path, &train.schema_arc())
}

fn write_line(w: &mut dyn Write, value: &impl serde::Serialize) -> Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io("<output>", e))
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    if let Some(threads) = g.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Synth { n } => {
            let mut spec = match &g.config {
                None => SyntheticSpec::default(),
                Some(_) => match config(g)?.data.source {
                    DataSource::Synthetic(spec) => spec,
                    DataSource::Csv { .. } => return Err(Error::Config("config data source is not synthetic".into())),
                },
            };
            if let Some(n) = n {
                spec.n = n;
            }
            if let Some(seed) = g.seed {
                spec.seed = seed;
            }
            let d = synthesize(&spec)?;
            match &g.out {
                Some(p) => save_dataset(&d, p)?,
                None => multigroup::io::write_dataset(&d, std::io::stdout().lock())?,
            }
        }
        Command::Fit { data, predict, learner: name } => {
            let cfg = config(g)?;
            let train = load_dataset(&data, label_column(&cfg))?;
            let model = fit(learner(&cfg, name.as_deref())?, &train)?;
            let target = match &predict {
                Some(p) => other(p, &train)?,
                None => train,
            };
            let preds: Vec<f64> = model.predict_rows(target.rows())?;
            let w = output(g)?;
            multigroup::io::write_predictions(&preds, w)?;
        }
        Command::Boost { data, base, predict, eval_base, predictions, epsilon } => {
            let cfg = config(g)?;
            let train = load_dataset(&data, label_column(&cfg))?;
            let groups = groups_for(&cfg, train.schema())?;
            let train_preds = load_predictions(&base)?;
            let eval = match (&predict, &eval_base) {
                (Some(p), Some(b)) => Some((other(p, &train)?, load_predictions(b)?)),
                _ => None,
            };
            let mut pairs: Vec<(&Dataset, &[f64])> = vec![(&train, &train_preds)];
            if let Some((d, p)) = &eval {
                pairs.push((d, p));
            }
            let base_model: Arc<dyn Predictor<f64>> = Arc::new(ExternalPredictions::from_aligned(pairs)?);
            let bcfg = BoostConfig { epsilon: epsilon.unwrap_or(cfg.boost.epsilon), max_iterations: cfg.boost.max_iterations };
            let (patched, trace) = boost(base_model, &train, &groups, &bcfg)?;
            let mut w = output(g)?;
            trace.write_jsonl(&mut w)?;
            finish(w)?;
            if let Some(path) = predictions {
                let rows = eval.as_ref().map_or(train.rows(), |(d, _)| d.rows());
                save_predictions(&patched.predict(rows)?, path)?;
            }
            return Ok(());
        }
        Command::Attack { data, aux, level } => {
            let cfg = config(g)?;
            let plan = cfg.attack.as_ref().ok_or_else(|| Error::Config("config has no [attack] section".into()))?;
            let train = load_dataset(&data, label_column(&cfg))?;
            let groups = groups_for(&cfg, train.schema())?;
            let aux = aux.as_deref().map(|p| other(p, &train)).transpose()?;
            let spec: Option<AttackSpec> = plan.plan.at_level(level, g.seed.unwrap_or_else(|| cfg.attack_seed(0, 0)))?;
            let corrupted = match spec {
                None => train,
                Some(spec) => spec.apply(&train, aux.as_ref(), &groups)?,
            };
            match &g.out {
                Some(p) => save_dataset(&corrupted, p)?,
                None => multigroup::io::write_dataset(&corrupted, std::io::stdout().lock())?,
            }
        }
        Command::Evaluate { data, predictions, gamma, validation, validation_predictions } => {
            let cfg = config(g)?;
            let test = load_dataset(&data, label_column(&cfg))?;
            let groups = groups_for(&cfg, test.schema())?;
            let preds = load_predictions(&predictions)?;
            let val = match (&validation, &validation_predictions) {
                (Some(v), Some(p)) => Some((other(v, &test)?, load_predictions(p)?)),
                _ => None,
            };
            let mut pairs: Vec<(&Dataset, &[f64])> = vec![(&test, &preds)];
            if let Some((d, p)) = &val {
                pairs.push((d, p));
            }
            let model = ExternalPredictions::from_aligned(pairs)?;
            let gamma = match (gamma, &val) {
                (Some(gm), _) => gm,
                (None, Some((d, _))) => {
                    let grid = cfg.metrics.gamma_grid.clone().unwrap_or_else(default_gamma_grid);
                    optimize_gamma(&model, d, &grid)?
                }
                (None, None) => 0.5,
            };
            let mut w = output(g)?;
            for report in group_reports(&model, &test, &groups, &gamma)? {
                write_line(&mut *w, &report)?;
            }
            finish(w)?;
            return Ok(());
        }
        Command::Experiment => {
            let mut cfg = config(g)?;
            if let Some(seed) = g.seed {
                cfg.splits.seed = seed;
            }
            let out_path = g.out.clone().or_else(|| cfg.output.clone());
            let results = run_experiment(&cfg)?;
            match out_path {
                Some(p) => {
                    let mut w = BufWriter::new(File::create(&p).map_err(|e| Error::io(&p, e))?);
                    results.write_jsonl(&mut w)?;
                    w.flush().map_err(|e| Error::io(&p, e))?;
                }
                None => results.write_jsonl(std::io::stdout().lock())?,
            }
        }
        Command::Probe => {
            let mut cfg = config(g)?;
            if let Some(seed) = g.seed {
                cfg.splits.seed = seed;
            }
            let report = theory_probes(&cfg)?;
            let mut w = output(g)?;
            serde_json::to_writer_pretty(&mut w, &report)?;
            w.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
            finish(w)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
