//! `cash`: run experiments, generate synthetic data and inspect reports.

mod config;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;
use std::time::Instant;

use cash_core::dataset::{load_csv, FeatureDataset, LoadOptions};
use cash_core::evaluation::{run_fixed_split, run_nested_cv, EvaluationError, EvaluationMode, EvaluationReport};
use cash_core::fingerprint::ImagingMetadata;
use cash_core::metrics::METRIC_NAMES;
use cash_core::search_space::{baseline_space, default_space, SearchSpace};
use cash_core::synth::{generate, SynthSpec};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "cash", version, about = "Random-search AutoML for binary classification of tabular features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize and evaluate on a dataset, writing reports to --out.
    Run(RunArgs),
    /// Write a synthetic dataset as CSV.
    Synth(SynthArgs),
    /// Print the metric summary of a finished run.
    Inspect(InspectArgs),
    /// Print a search space as TOML, or validate one.
    Space(SpaceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Nested,
    Fixed,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset CSV (nested mode).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Training CSV (fixed mode).
    #[arg(long)]
    train: Option<PathBuf>,
    /// Test CSV (fixed mode).
    #[arg(long)]
    test: Option<PathBuf>,
    /// Name of the label column (default "label").
    #[arg(long)]
    labels_column: Option<String>,
    /// CSV of (feature_name, group_tag) pairs.
    #[arg(long)]
    groups: Option<PathBuf>,
    /// TOML imaging metadata for the fingerprint rules.
    #[arg(long)]
    metadata: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Master seed for splits, bootstrap and search.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for workflow evaluation (default: all cores).
    #[arg(long, env = "CASH_WORKERS")]
    workers: Option<usize>,
    /// Restrict the search to LASSO selection plus logistic regression.
    #[arg(long)]
    baseline: bool,
    /// Nested cross-validation on --data, or a fixed --train/--test split.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Number of random-search workflows.
    #[arg(long)]
    krs: Option<usize>,
    /// Ensemble size.
    #[arg(long)]
    kens: Option<usize>,
    /// Number of outer splits (nested mode).
    #[arg(long)]
    ktest: Option<usize>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    signal: usize,
    #[arg(long, default_value_t = 45)]
    noise: usize,
    /// Standardized class separation of signal features.
    #[arg(long, default_value_t = 2.0)]
    sep: f64,
    /// Fraction of samples in class 0.
    #[arg(long, default_value_t = 0.5)]
    ratio: f64,
    /// Fraction of feature cells left empty.
    #[arg(long, default_value_t = 0.0)]
    missing: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "label")]
    labels_column: String,
    /// Also write the feature groups file here.
    #[arg(long)]
    groups_out: Option<PathBuf>,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InspectArgs {
    /// report.json or the run output directory.
    report: PathBuf,
    /// Print only this metric.
    #[arg(long)]
    metric: Option<String>,
}

#[derive(Args)]
struct SpaceArgs {
    /// Print the restricted baseline space.
    #[arg(long)]
    baseline: bool,
    /// Validate this TOML space instead of printing one.
    #[arg(long)]
    check: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "error[input]: {m}"),
            CliError::Runtime(m) => write!(f, "error[runtime]: {m}"),
        }
    }
}

impl From<EvaluationError> for CliError {
    fn from(e: EvaluationError) -> Self {
        match e {
            EvaluationError::InvalidConfig(_)
            | EvaluationError::FeatureMismatch(_)
            | EvaluationError::Dataset(_)
            | EvaluationError::Fingerprint(_) => CliError::Input(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Inspect(a) => cmd_inspect(a),
        Command::Space(a) => cmd_space(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}

#[derive(Serialize)]
struct Manifest {
    command: Vec<String>,
    config_path: Option<PathBuf>,
    config: RunConfig,
    baseline: bool,
    workers: usize,
    dataset_digests: BTreeMap<String, String>,
    master_seed: u64,
    optimizer_seed: u64,
    engine_version: String,
    report_sha256: String,
    timings_seconds: BTreeMap<String, f64>,
}

fn file_digest(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

fn load(path: &Path, cfg: &RunConfig) -> Result<FeatureDataset, CliError> {
    let d = &cfg.data;
    let opts = LoadOptions {
        label_column: d.label_column.clone(),
        groups_path: d.groups.clone(),
        missing_token: d.missing_token.clone(),
        positive_class: d.positive_class.clone(),
    };
    load_csv(path, &opts).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Merges command-line overrides into the file configuration.
fn resolve(a: &RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p).map_err(CliError::Input)?,
        None => RunConfig::default(),
    };
    if let Some(l) = &a.labels_column {
        cfg.data.label_column = l.clone();
    }
    if a.groups.is_some() {
        cfg.data.groups = a.groups.clone();
    }
    if a.metadata.is_some() {
        cfg.data.metadata = a.metadata.clone();
    }
    if let Some(s) = a.seed {
        cfg.evaluation.master_seed = s;
        cfg.optimizer.master_seed = s;
    }
    match a.mode {
        Some(ModeArg::Nested) => cfg.evaluation.mode = EvaluationMode::NestedCv,
        Some(ModeArg::Fixed) => cfg.evaluation.mode = EvaluationMode::FixedSplit,
        None => {}
    }
    if a.baseline {
        cfg.optimizer.n_ensemble = 1;
    }
    if let Some(k) = a.krs {
        cfg.optimizer.n_random_search = k;
    }
    if let Some(k) = a.kens {
        cfg.optimizer.n_ensemble = k;
    }
    if let Some(k) = a.ktest {
        cfg.evaluation.k_test = k;
    }
    Ok(cfg)
}

fn cmd_run(a: RunArgs) -> Result<(), CliError> {
    let t0 = Instant::now();
    let cfg = resolve(&a)?;
    let eval_cfg = cfg.evaluation_config();
    eval_cfg.validate()?;
    let space: SearchSpace = if a.baseline {
        baseline_space()
    } else {
        cfg.space.clone().unwrap_or_else(|| default_space(true))
    };
    space.validate().map_err(|e| CliError::Input(format!("search space: {e}")))?;
    let meta = match &cfg.data.metadata {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Input(format!("cannot read {}: {e}", p.display())))?;
            Some(ImagingMetadata::from_toml_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?)
        }
        None => None,
    };
    let workers = a.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        return Err(CliError::Input("--workers must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    let mut digests = BTreeMap::new();
    let inputs: Vec<&PathBuf> = match eval_cfg.mode {
        EvaluationMode::NestedCv => {
            let d = a.data.as_ref().ok_or_else(|| CliError::Input("nested mode needs --data".into()))?;
            vec![d]
        }
        EvaluationMode::FixedSplit => {
            let tr = a.train.as_ref().ok_or_else(|| CliError::Input("fixed mode needs --train".into()))?;
            let te = a.test.as_ref().ok_or_else(|| CliError::Input("fixed mode needs --test".into()))?;
            vec![tr, te]
        }
    };
    for p in inputs.iter().copied().chain(cfg.data.groups.iter()).chain(cfg.data.metadata.iter()) {
        digests.insert(p.display().to_string(), file_digest(p)?);
    }
    let datasets = inputs.iter().map(|p| load(p, &cfg)).collect::<Result<Vec<_>, _>>()?;
    let t_load = t0.elapsed().as_secs_f64();

    std::fs::create_dir_all(&a.out)
        .map_err(|e| CliError::Input(format!("cannot create {}: {e}", a.out.display())))?;
    let log_path = a.out.join("workflows.log");
    let log_file = std::fs::File::create(&log_path)
        .map_err(|e| CliError::Input(format!("cannot create {}: {e}", log_path.display())))?;
    let sink: Mutex<Box<dyn Write + Send>> = Mutex::new(Box::new(std::io::BufWriter::new(log_file)));

    let t1 = Instant::now();
    let report = pool.install(|| match eval_cfg.mode {
        EvaluationMode::NestedCv => run_nested_cv(&datasets[0], &space, &eval_cfg, meta.as_ref(), Some(&sink)),
        EvaluationMode::FixedSplit => {
            run_fixed_split(&datasets[0], &datasets[1], &space, &eval_cfg, meta.as_ref(), Some(&sink))
        }
    })?;
    let t_eval = t1.elapsed().as_secs_f64();
    sink.lock()
        .expect("log lock")
        .flush()
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", log_path.display())))?;

    let t2 = Instant::now();
    let report_path = a.out.join("report.json");
    report.write_json(&report_path)?;
    report.write_summary_csv(&a.out.join("summary.csv"))?;
    report.write_roc_band_csv(&a.out.join("roc_band.csv"))?;
    report.write_per_split_csv(&a.out.join("per_split.csv"))?;
    let manifest = Manifest {
        command: std::env::args().collect(),
        config_path: a.config.clone(),
        config: cfg.clone(),
        baseline: a.baseline,
        workers,
        dataset_digests: digests,
        master_seed: eval_cfg.master_seed,
        optimizer_seed: eval_cfg.optimizer.master_seed,
        engine_version: cash_core::VERSION.to_string(),
        report_sha256: file_digest(&report_path)?,
        timings_seconds: BTreeMap::from([
            ("load".to_string(), t_load),
            ("evaluate".to_string(), t_eval),
            ("write".to_string(), t2.elapsed().as_secs_f64()),
        ]),
    };
    let manifest_path = a.out.join("manifest.json");
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n")
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", manifest_path.display())))?;

    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    print!("{}", summary_table(&report, None));
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<(), CliError> {
    let spec = SynthSpec {
        n_samples: a.n,
        n_signal: a.signal,
        n_noise: a.noise,
        class_separation: a.sep,
        class_ratio: a.ratio,
        missing_fraction: a.missing,
        seed: a.seed,
    };
    let d = generate(&spec).map_err(|e| CliError::Input(e.to_string()))?;
    d.write_csv(&a.out, &a.labels_column)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    if let Some(g) = &a.groups_out {
        d.write_groups_csv(g).map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    Ok(())
}

fn summary_table(r: &EvaluationReport, metric: Option<&str>) -> String {
    let mut out = String::new();
    let rows: Vec<&str> = match metric {
        Some(m) => vec![m],
        None => METRIC_NAMES.to_vec(),
    };
    if metric.is_none() {
        out.push_str(&format!("{:<12} {:>6}  95% CI\n", "metric", "mean"));
    }
    for name in rows {
        let m = &r.summary[name];
        out.push_str(&format!("{:<12} {:>6.3}  [{:.3}, {:.3}]\n", name, m.mean, m.lower, m.upper));
    }
    if metric.is_none() {
        out.push_str("\nensemble members by classifier\n");
        for (k, v) in r.classifier_histogram() {
            out.push_str(&format!("{k:<20} {v}\n"));
        }
    }
    out
}

fn cmd_inspect(a: InspectArgs) -> Result<(), CliError> {
    let path = if a.report.is_dir() {
        a.report.join("report.json")
    } else {
        a.report.clone()
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let report = EvaluationReport::from_json(&text).map_err(|e| {
        CliError::Input(format!(
            "{} is not a valid report (line {}, column {}): {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })?;
    if let Some(m) = &a.metric {
        if !METRIC_NAMES.contains(&m.as_str()) {
            return Err(CliError::Input(format!(
                "unknown metric '{m}', expected one of {}",
                METRIC_NAMES.join(", ")
            )));
        }
        if !report.summary.contains_key(m) {
            return Err(CliError::Input(format!("report has no summary for '{m}'")));
        }
    } else if let Some(missing) = METRIC_NAMES.iter().find(|m| !report.summary.contains_key(**m)) {
        return Err(CliError::Input(format!("report has no summary for '{missing}'")));
    }
    print!("{}", summary_table(&report, a.metric.as_deref()));
    Ok(())
}

fn cmd_space(a: SpaceArgs) -> Result<(), CliError> {
    if let Some(p) = &a.check {
        let text = std::fs::read_to_string(p)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", p.display())))?;
        SearchSpace::from_toml_str(&text)
            .and_then(|s| s.validate().map(|_| s))
            .map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
        println!("ok");
        return Ok(());
    }
    let s = if a.baseline { baseline_space() } else { default_space(true) };
    print!("{}", s.to_toml_string());
    Ok(())
}
