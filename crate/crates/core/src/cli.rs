//! `fairgrad` command line.
//!
//! ```text
//! fairgrad generate --spec spec.json --out data.csv
//! fairgrad train    --data data.csv --label-col y --sensitive-col s --fairness eopp --desirable-labels 1
//! fairgrad sweep    --data data.csv --label-col y --sensitive-col s --fairness eodds --epsilons 0,0.01,0.05 --repeats 5
//! ```
//!
//! `train` writes `manifest.json` (before training), `checkpoint.json`,
//! `history.csv` and `report.json` into the output directory. Without
//! `--test-data` the input is split 60/20/20 into train/validation/test;
//! with it the input is split 75/25 into train/validation.
//!
//! `sweep` runs one training per (setting, repeat) with seed
//! `--seed + repeat`, in parallel, writing each run into
//! `runs/<axis>-<value>-r<repeat>/` plus `runs.csv` and `aggregate.csv`.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numeric failure during training.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::data::{self, CsvData, Dataset, SyntheticSpec};
use crate::fairness::FairnessNotion;
use crate::model::{Architecture, Checkpoint};
use crate::report::{self, FairnessReport, RunScore, SweepRun};
use crate::trainer::{self, TrainConfig, TrainMode};
use crate::{Error, Result};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "fairgrad",
    version,
    about = "Fairness-aware training by group reweighting"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a Gaussian dataset from a JSON spec and write it as CSV.
    Generate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model and evaluate it.
    Train(TrainArgs),
    /// Repeat training over a list of epsilons or batch sizes.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FairnessArg {
    Ap,
    Eodds,
    Eopp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Unconstrained,
    Fairgrad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Linear,
    Mlp,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Training CSV.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub label_col: String,
    #[arg(long)]
    pub sensitive_col: String,
    /// Separate test CSV with the same columns.
    #[arg(long)]
    pub test_data: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "eopp")]
    pub fairness: FairnessArg,
    /// Label values (as written in the CSV) that count as desirable outcomes
    /// for equality of opportunity.
    #[arg(long, value_delimiter = ',')]
    pub desirable_labels: Vec<String>,
    #[arg(long, value_enum, default_value = "fairgrad")]
    pub mode: ModeArg,
    /// Allowed unfairness per group; enables the ε-constrained variant.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, value_enum, default_value = "linear")]
    pub model: ModelArg,
    /// Hidden layer sizes for the MLP.
    #[arg(long, value_delimiter = ',', default_value = "128,64,32")]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 0.2)]
    pub dropout: f64,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.01)]
    pub lambda_lr: f64,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.03)]
    pub beta: f64,
    /// Maximum global L2 norm of the gradient.
    #[arg(long, default_value_t = 0.05)]
    pub clip_norm: f64,
    #[arg(long, env = "FAIRGRAD_OUT", default_value = "fairgrad-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub train: TrainArgs,
    /// Runs the ε-constrained variant once per value.
    #[arg(long, value_delimiter = ',')]
    pub epsilons: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub batch_sizes: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Generate { spec, out } => cmd_generate(&spec, &out),
        Command::Train(a) => cmd_train(&a),
        Command::Sweep(a) => cmd_sweep(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn main() -> i32 {
    run(std::env::args_os())
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_USAGE,
        Error::NonFinite | Error::NonFiniteLoss { .. } => EXIT_NUMERIC,
        Error::Data(_) | Error::EmptyGroup(_) | Error::Io { .. } | Error::Parse { .. } => EXIT_DATA,
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    report::write_atomic(path, text.as_bytes())
}

pub fn cmd_generate(spec_path: &Path, out: &Path) -> Result<i32> {
    let bytes = read_bytes(spec_path)?;
    let spec: SyntheticSpec = serde_json::from_slice(&bytes).map_err(|e| Error::Parse {
        path: spec_path.to_path_buf(),
        message: e.to_string(),
    })?;
    let ds = data::gen_synthetic(&spec)?;
    data::write_csv(&ds, out)?;
    eprintln!(
        "wrote {} rows to {} (spec sha256 {})",
        ds.len(),
        out.display(),
        sha256_hex(&bytes)
    );
    Ok(0)
}

#[derive(Debug, Clone, Serialize)]
pub struct DataProvenance {
    pub path: PathBuf,
    pub sha256: String,
    pub rows: usize,
    pub test_path: Option<PathBuf>,
    pub test_sha256: Option<String>,
    pub test_rows: Option<usize>,
    pub label_column: String,
    pub sensitive_column: String,
    /// Raw CSV value of each label code.
    pub label_codes: Vec<String>,
    pub sensitive_codes: Vec<String>,
}

/// Everything needed to repeat a run; written before training starts.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: TrainConfig,
    pub notion: FairnessNotion,
    pub data: DataProvenance,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepPlan>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPlan {
    pub epsilons: Vec<f64>,
    pub batch_sizes: Vec<usize>,
    pub repeats: usize,
}

/// Input data after loading, before any split.
pub struct Inputs {
    pub data: Dataset,
    pub test: Option<Dataset>,
    pub provenance: DataProvenance,
}

/// Maps `other`'s category strings onto `base`'s codes.
fn recode(other: CsvData, base: &CsvData, path: &Path) -> Result<Dataset> {
    if other.feature_names != base.feature_names {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: format!(
                "feature columns {:?} differ from the training file's {:?}",
                other.feature_names, base.feature_names
            ),
        });
    }
    let map = |codes: &[String], base_codes: &[String], what: &str| -> Result<Vec<usize>> {
        codes
            .iter()
            .map(|c| {
                base_codes
                    .iter()
                    .position(|b| b == c)
                    .ok_or_else(|| Error::Parse {
                        path: path.to_path_buf(),
                        message: format!("{what} value '{c}' does not occur in the training file"),
                    })
            })
            .collect()
    };
    let lmap = map(&other.label_codes, &base.label_codes, "label")?;
    let smap = map(&other.sensitive_codes, &base.sensitive_codes, "sensitive")?;
    let ds = other.dataset;
    let labels = ds.labels().iter().map(|&y| lmap[y]).collect();
    let sensitive = ds.sensitive().iter().map(|&s| smap[s]).collect();
    let features: Array2<f64> = ds.features().clone();
    Dataset::new(
        features,
        labels,
        sensitive,
        base.label_codes.len(),
        base.sensitive_codes.len(),
    )
}

pub fn load_inputs(a: &TrainArgs) -> Result<Inputs> {
    let bytes = read_bytes(&a.data)?;
    let train = data::read_csv(bytes.as_slice(), &a.data, &a.label_col, &a.sensitive_col)?;
    let (test, test_sha, test_rows) = match &a.test_data {
        Some(p) => {
            let tb = read_bytes(p)?;
            let t = data::read_csv(tb.as_slice(), p, &a.label_col, &a.sensitive_col)?;
            let ds = recode(t, &train, p)?;
            let rows = ds.len();
            (Some(ds), Some(sha256_hex(&tb)), Some(rows))
        }
        None => (None, None, None),
    };
    let provenance = DataProvenance {
        path: a.data.clone(),
        sha256: sha256_hex(&bytes),
        rows: train.dataset.len(),
        test_path: a.test_data.clone(),
        test_sha256: test_sha,
        test_rows,
        label_column: a.label_col.clone(),
        sensitive_column: a.sensitive_col.clone(),
        label_codes: train.label_codes.clone(),
        sensitive_codes: train.sensitive_codes.clone(),
    };
    Ok(Inputs {
        data: train.dataset,
        test,
        provenance,
    })
}

pub fn resolve_notion(a: &TrainArgs, label_codes: &[String]) -> Result<FairnessNotion> {
    let notion = match a.fairness {
        FairnessArg::Ap => FairnessNotion::accuracy_parity(),
        FairnessArg::Eodds => FairnessNotion::equalized_odds(),
        FairnessArg::Eopp => {
            if a.desirable_labels.is_empty() {
                return Err(Error::Config(
                    "--fairness eopp needs --desirable-labels".into(),
                ));
            }
            let codes = a
                .desirable_labels
                .iter()
                .map(|raw| {
                    label_codes
                        .iter()
                        .position(|c| c == raw.trim())
                        .ok_or_else(|| {
                            Error::Config(format!(
                                "desirable label '{raw}' does not occur in column '{}'",
                                a.label_col
                            ))
                        })
                })
                .collect::<Result<Vec<_>>>()?;
            FairnessNotion::equality_of_opportunity(codes)
        }
    };
    if a.fairness != FairnessArg::Eopp && !a.desirable_labels.is_empty() {
        eprintln!("warning: --desirable-labels only applies to --fairness eopp; ignored");
    }
    Ok(notion)
}

pub fn resolve_config(a: &TrainArgs) -> Result<TrainConfig> {
    let architecture = match a.model {
        ModelArg::Linear => Architecture::Linear,
        ModelArg::Mlp => Architecture::Mlp {
            hidden: a.hidden.clone(),
            dropout: a.dropout,
        },
    };
    let mode = match (a.mode, a.epsilon) {
        (ModeArg::Unconstrained, Some(_)) => {
            eprintln!("warning: --epsilon has no effect with --mode unconstrained; ignored");
            TrainMode::Unconstrained
        }
        (ModeArg::Unconstrained, None) => TrainMode::Unconstrained,
        (ModeArg::Fairgrad, None) => TrainMode::FairGradExact,
        (ModeArg::Fairgrad, Some(epsilon)) => TrainMode::FairGradEpsilon { epsilon },
    };
    let cfg = TrainConfig {
        architecture,
        eta_theta: a.lr,
        eta_lambda: a.lambda_lr,
        batch_size: a.batch_size,
        epochs: a.epochs,
        clip_norm: a.clip_norm,
        seed: a.seed,
        mode,
        beta: a.beta,
        clip_weights_nonnegative: false,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Result of one split → standardize → train → evaluate pass.
pub struct RunResult {
    pub checkpoint: Checkpoint,
    pub history: trainer::TrainHistory,
    pub report: FairnessReport,
}

pub fn run_once(inputs: &Inputs, cfg: &TrainConfig, notion: &FairnessNotion) -> Result<RunResult> {
    let (train, val, test) = match &inputs.test {
        Some(t) => {
            let (tr, va) = data::split_train_val(&inputs.data, cfg.seed)?;
            (tr, va, t.clone())
        }
        None => data::split(&inputs.data, cfg.seed)?,
    };
    let (train, rest, _) = data::standardize(&train, &[&val, &test]);
    let (val, test) = (&rest[0], &rest[1]);
    let outcome = trainer::train(cfg, &train, val, notion)?;
    let params = outcome.selected_params().clone();
    let report = report::evaluate(&params, &outcome.spec, test, notion)?;
    Ok(RunResult {
        checkpoint: Checkpoint {
            spec: outcome.spec.clone(),
            params,
        },
        history: outcome.history,
        report,
    })
}

fn save_run(run: &RunResult, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    run.checkpoint.save(&dir.join("checkpoint.json"))?;
    report::save_history(&run.history, &dir.join("history.csv"))?;
    run.report.save(&dir.join("report.json"))
}

pub fn cmd_train(a: &TrainArgs) -> Result<i32> {
    let cfg = resolve_config(a)?;
    let inputs = load_inputs(a)?;
    let notion = resolve_notion(a, &inputs.provenance.label_codes)?;
    create_dir(&a.out)?;
    let manifest = RunManifest {
        command: "train".into(),
        config: cfg.clone(),
        notion: notion.clone(),
        data: inputs.provenance.clone(),
        seeds: vec![cfg.seed],
        out_dir: a.out.clone(),
        sweep: None,
    };
    write_json(&manifest, &a.out.join("manifest.json"))?;
    let run = run_once(&inputs, &cfg, &notion)?;
    save_run(&run, &a.out)?;
    let r = &run.report;
    println!(
        "test accuracy {:.4}  mean |F| {:.4}  max F {:.4}  min F {:.4}  -> {}",
        r.accuracy,
        r.mean_abs,
        r.max_f,
        r.min_f,
        a.out.display()
    );
    Ok(0)
}

struct Job {
    axis: &'static str,
    value: String,
    repeat: usize,
    cfg: TrainConfig,
}

fn sweep_jobs(a: &SweepArgs, base: &TrainConfig) -> Vec<Job> {
    let mut jobs = Vec::new();
    for &eps in &a.epsilons {
        for r in 0..a.repeats {
            jobs.push(Job {
                axis: "epsilon",
                value: eps.to_string(),
                repeat: r,
                cfg: TrainConfig {
                    mode: TrainMode::FairGradEpsilon { epsilon: eps },
                    seed: base.seed + r as u64,
                    ..base.clone()
                },
            });
        }
    }
    for &bs in &a.batch_sizes {
        for r in 0..a.repeats {
            jobs.push(Job {
                axis: "batch_size",
                value: bs.to_string(),
                repeat: r,
                cfg: TrainConfig {
                    batch_size: bs,
                    seed: base.seed + r as u64,
                    ..base.clone()
                },
            });
        }
    }
    jobs
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<i32> {
    if a.epsilons.is_empty() && a.batch_sizes.is_empty() {
        return Err(Error::Config(
            "sweep needs --epsilons and/or --batch-sizes".into(),
        ));
    }
    if a.repeats == 0 {
        return Err(Error::Config("--repeats must be at least 1".into()));
    }
    if !a.epsilons.is_empty() && a.train.mode == ModeArg::Unconstrained {
        eprintln!("warning: --epsilons runs the epsilon-constrained variant regardless of --mode");
    }
    let base = resolve_config(&a.train)?;
    let jobs = sweep_jobs(a, &base);
    for j in &jobs {
        j.cfg.validate()?;
    }
    let inputs = load_inputs(&a.train)?;
    let notion = resolve_notion(&a.train, &inputs.provenance.label_codes)?;
    let out = &a.train.out;
    create_dir(out)?;
    let mut seeds: Vec<u64> = jobs.iter().map(|j| j.cfg.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    let manifest = RunManifest {
        command: "sweep".into(),
        config: base,
        notion: notion.clone(),
        data: inputs.provenance.clone(),
        seeds,
        out_dir: out.clone(),
        sweep: Some(SweepPlan {
            epsilons: a.epsilons.clone(),
            batch_sizes: a.batch_sizes.clone(),
            repeats: a.repeats,
        }),
    };
    write_json(&manifest, &out.join("manifest.json"))?;

    let results: Vec<(SweepRun, Option<i32>)> = jobs
        .par_iter()
        .map(|j| {
            let dir = out
                .join("runs")
                .join(format!("{}-{}-r{}", j.axis, j.value, j.repeat));
            let outcome = run_once(&inputs, &j.cfg, &notion).and_then(|run| {
                save_run(&run, &dir)?;
                Ok(RunScore {
                    accuracy: run.report.accuracy,
                    mean_abs_fairness: run.report.mean_abs,
                })
            });
            let code = outcome.as_ref().err().map(exit_code);
            if let Err(e) = &outcome {
                eprintln!("run {}={} repeat {} failed: {e}", j.axis, j.value, j.repeat);
            }
            let run = SweepRun {
                axis: j.axis.to_string(),
                value: j.value.clone(),
                repeat: j.repeat,
                seed: j.cfg.seed,
                outcome: outcome.map_err(|e| e.to_string()),
            };
            (run, code)
        })
        .collect();
    let first_failure = results.iter().find_map(|(_, c)| *c);
    let runs: Vec<SweepRun> = results.into_iter().map(|(r, _)| r).collect();

    let agg = report::aggregate(&runs);
    report::write_atomic(
        &out.join("runs.csv"),
        report::runs_to_csv(&runs)?.as_bytes(),
    )?;
    report::write_atomic(
        &out.join("aggregate.csv"),
        report::aggregate_to_csv(&agg)?.as_bytes(),
    )?;
    for g in &agg {
        let show = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
        println!(
            "{}={}: accuracy {} ± {}  fairness {} ± {}  ({} runs, {} failed)",
            g.axis,
            g.value,
            show(g.accuracy_mean),
            show(g.accuracy_std),
            show(g.fairness_mean),
            show(g.fairness_std),
            g.runs,
            g.failed
        );
    }
    if let Some(code) = first_failure {
        let failed = runs.iter().filter(|r| r.outcome.is_err()).count();
        eprintln!("{failed} of {} runs failed", runs.len());
        return Ok(code);
    }
    Ok(0)
}
