use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use conseq_core::artifact::PipelineArtifact;
use conseq_core::classifiers::ModelKind;
use conseq_core::config::RunConfig;
use conseq_core::corpus::{class_histogram, filter_rare_classes, stratified_split_indices, CorpusError, Dataset, DatasetFormat};
use conseq_core::eval::{evaluate, run_comparison};
use conseq_core::pipeline::FeaturizerKind;
use conseq_core::workflow::train_run;
use conseq_core::Error;

const STOPWORDS_ENV: &str = "CONSEQ_STOPWORDS";

#[derive(Debug, Parser)]
#[command(name = "conseq", version, about = "Predict layman consequence clusters of cyber-attack descriptions")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Seed for splitting, embedding and model initialization.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat JSON object of configuration keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Drop classes with fewer records than this before splitting.
    #[arg(long, global = true)]
    min_count: Option<usize>,
    /// Override one configuration key, e.g. `--set tfidf.min_df=1`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Metric averaging for reports.
    #[arg(long, global = true)]
    averaging: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a CSV or JSON dataset and write its canonical JSON form.
    Ingest {
        input: PathBuf,
        /// Input format; inferred from the extension when omitted.
        #[arg(long)]
        input_format: Option<String>,
        /// Output path; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print record count, class histogram and mean description length.
    Inspect { dataset: PathBuf },
    /// Show the stratified train/test membership.
    Split {
        dataset: PathBuf,
        #[arg(long)]
        train_out: Option<PathBuf>,
        #[arg(long)]
        test_out: Option<PathBuf>,
    },
    /// Fit a featurizer and classifier and write a pipeline artifact.
    Train {
        dataset: PathBuf,
        #[arg(long)]
        featurizer: Option<String>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score an artifact against a labelled dataset.
    Evaluate { artifact: PathBuf, dataset: PathBuf },
    /// Predict the consequence cluster of new descriptions.
    Predict {
        artifact: PathBuf,
        /// Description text; may be repeated.
        #[arg(long)]
        text: Vec<String>,
        /// File with one description per line.
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Train and score every featurizer × model combination.
    Compare { dataset: PathBuf },
}

#[derive(Debug)]
enum Failure {
    Data(String),
    Artifact(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Artifact(_) => Failure::Artifact(e.to_string()),
            other => Failure::Data(other.to_string()),
        }
    }
}

/// Writes to standard output; a closed pipe ends the process quietly.
fn emit(text: &str) {
    use std::io::Write;
    let mut stdout = std::io::stdout().lock();
    if let Err(e) = stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: cannot write output: {e}");
        std::process::exit(1);
    }
}

macro_rules! out {
    ($($t:tt)*) => { emit(&format!($($t)*)) };
}

macro_rules! outln {
    ($($t:tt)*) => { emit(&(format!($($t)*) + "\n")) };
}

macro_rules! data_err {
    ($($t:tt)*) => { Failure::Data(format!($($t)*)) };
}

fn resolve_config(g: &GlobalArgs) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::default();
    if let Some(p) = std::env::var_os(STOPWORDS_ENV) {
        cfg.cleaning.stopwords_file = Some(PathBuf::from(p));
    }
    if let Some(path) = &g.config {
        cfg.merge_file(path).map_err(Error::from)?;
    }
    if let Some(seed) = g.seed {
        cfg.set("seed", json!(seed)).map_err(Error::from)?;
    }
    if let Some(m) = g.min_count {
        cfg.set("min_count", json!(m)).map_err(Error::from)?;
    }
    if let Some(a) = &g.averaging {
        cfg.set("averaging", json!(a)).map_err(Error::from)?;
    }
    for o in &g.overrides {
        cfg.set_from_str(o).map_err(Error::from)?;
    }
    cfg.validate().map_err(Error::from)?;
    Ok(cfg)
}

fn load_dataset(path: &Path, format: Option<&str>) -> Result<Dataset, Failure> {
    let format = match format {
        Some(f) => f.parse::<DatasetFormat>().map_err(|e| data_err!("{e}"))?,
        None => DatasetFormat::from_path(path).unwrap_or(DatasetFormat::Json),
    };
    Ok(Dataset::load(path, format).map_err(Error::from)?)
}

fn timestamp() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.parse().ok()) {
        return t;
    }
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn print_json(v: &serde_json::Value) {
    outln!("{}", serde_json::to_string_pretty(v).expect("json value serializes"));
}

fn to_json<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("report serializes")
}

fn cmd_ingest(input: &Path, input_format: Option<&str>, out: Option<&Path>) -> Result<(), Failure> {
    let ds = load_dataset(input, input_format)?;
    match out {
        Some(p) => {
            ds.save(p).map_err(Error::from)?;
            eprintln!("wrote {} records to {}", ds.len(), p.display());
        }
        None => out!("{}", ds.to_canonical_json()),
    }
    Ok(())
}

fn cmd_inspect(path: &Path, g: &GlobalArgs, cfg: &RunConfig) -> Result<(), Failure> {
    let ds = load_dataset(path, None)?;
    let ds = match g.min_count {
        None => ds,
        Some(m) => match filter_rare_classes(&ds, m) {
            Ok(f) => f,
            Err(CorpusError::Empty) => {
                match g.format {
                    Format::Text => outln!("no records remain after dropping classes with fewer than {m} records"),
                    Format::Json => print_json(&json!({ "records": 0, "histogram": {}, "empty": true })),
                }
                return Ok(());
            }
            Err(e) => return Err(Error::from(e).into()),
        },
    };
    let hist = class_histogram(&ds);
    let descriptions: Vec<&String> = ds.records().iter().flat_map(|r| &r.descriptions).collect();
    let mean_words = descriptions.iter().map(|d| d.split_whitespace().count()).sum::<usize>() as f64
        / descriptions.len().max(1) as f64;
    let synthetic = ds.records().iter().filter(|r| r.synthetic).count();
    match g.format {
        Format::Text => {
            outln!("records: {}", ds.len());
            outln!("synthetic records: {synthetic}");
            outln!("mean description length: {mean_words:.1} words");
            outln!("classes: {}", hist.len());
            for (c, n) in &hist {
                let label = ds.taxonomy().label(*c).unwrap_or("");
                outln!("{:>4} {:>5}  {}", c.get(), n, label);
            }
        }
        Format::Json => {
            let h: serde_json::Map<String, serde_json::Value> =
                hist.iter().map(|(c, n)| (c.get().to_string(), json!(n))).collect();
            print_json(&json!({
                "records": ds.len(),
                "synthetic_records": synthetic,
                "mean_description_words": mean_words,
                "histogram": h,
                "min_count": g.min_count,
                "seed": cfg.seed,
            }));
        }
    }
    Ok(())
}

fn cmd_split(path: &Path, train_out: Option<&Path>, test_out: Option<&Path>, g: &GlobalArgs, cfg: &RunConfig) -> Result<(), Failure> {
    let ds = filter_rare_classes(&load_dataset(path, None)?, cfg.min_count).map_err(Error::from)?;
    let idx = stratified_split_indices(&ds, &cfg.split_config()).map_err(Error::from)?;
    let ids = |v: &[usize]| -> Vec<String> { v.iter().map(|&i| ds.records()[i].id.clone()).collect() };
    let (train_ids, test_ids) = (ids(&idx.train), ids(&idx.test));
    if let Some(p) = train_out {
        ds.subset(&idx.train).save(p).map_err(Error::from)?;
    }
    if let Some(p) = test_out {
        ds.subset(&idx.test).save(p).map_err(Error::from)?;
    }
    match g.format {
        Format::Text => {
            outln!("train ({}): {}", train_ids.len(), train_ids.join(" "));
            outln!("test ({}): {}", test_ids.len(), test_ids.join(" "));
        }
        Format::Json => print_json(&json!({ "seed": cfg.seed, "train": train_ids, "test": test_ids })),
    }
    Ok(())
}

fn cmd_train(
    path: &Path,
    featurizer: Option<&str>,
    model: Option<&str>,
    out: &Path,
    g: &GlobalArgs,
    mut cfg: RunConfig,
) -> Result<(), Failure> {
    if let Some(f) = featurizer {
        let kind: FeaturizerKind = f.parse().map_err(|e| data_err!("{e}"))?;
        cfg.featurizer = kind;
    }
    if let Some(m) = model {
        let kind: ModelKind = m.parse().map_err(|e| data_err!("{e}"))?;
        cfg.model = kind;
    }
    let ds = load_dataset(path, None)?;
    let outcome = train_run(&ds, &cfg, timestamp())?;
    outcome.artifact.save(out).map_err(Error::from)?;
    match g.format {
        Format::Text => {
            outln!("featurizer {} + model {}; artifact written to {}", cfg.featurizer, cfg.model, out.display());
            outln!("\n== train split ==\n{}", outcome.train_report.render_text(cfg.averaging));
            outln!("== test split ==\n{}", outcome.test_report.render_text(cfg.averaging));
        }
        Format::Json => print_json(&json!({
            "artifact": out,
            "featurizer": cfg.featurizer,
            "model": cfg.model,
            "train": to_json(&outcome.train_report),
            "test": to_json(&outcome.test_report),
        })),
    }
    Ok(())
}

fn cmd_evaluate(artifact: &Path, dataset: &Path, g: &GlobalArgs, cfg: &RunConfig) -> Result<(), Failure> {
    let a = PipelineArtifact::load(artifact).map_err(Error::from)?;
    let ds = load_dataset(dataset, None)?;
    let truth: Vec<u32> = ds.labels().into_iter().map(u32::from).collect();
    let predicted = a.pipeline.predict_dataset(&ds)?;
    let report = evaluate(&truth, &predicted).map_err(Error::from)?;
    match g.format {
        Format::Text => out!("{}", report.render_text(cfg.averaging)),
        Format::Json => print_json(&to_json(&report)),
    }
    Ok(())
}

fn cmd_predict(artifact: &Path, texts: &[String], file: Option<&Path>, g: &GlobalArgs) -> Result<(), Failure> {
    let a = PipelineArtifact::load(artifact).map_err(Error::from)?;
    let mut inputs = texts.to_vec();
    if let Some(f) = file {
        let content = std::fs::read_to_string(f).map_err(|e| data_err!("cannot read {}: {e}", f.display()))?;
        inputs.extend(content.lines().map(str::to_string));
    }
    if inputs.is_empty() {
        return Err(data_err!("nothing to predict: pass --text or --file"));
    }
    let preds = a.pipeline.predict(&inputs)?;
    for (i, p) in preds.iter().enumerate() {
        if p.low_signal {
            eprintln!("warning: input {} has no known vocabulary; prediction is low-signal", i + 1);
        }
    }
    match g.format {
        Format::Text => {
            for p in &preds {
                outln!("{}\t{}", p.cluster, a.label(p.cluster).unwrap_or(""));
            }
        }
        Format::Json => {
            let rows: Vec<_> = inputs
                .iter()
                .zip(&preds)
                .map(|(t, p)| {
                    json!({ "input": t, "cluster": p.cluster, "label": a.label(p.cluster), "low_signal": p.low_signal })
                })
                .collect();
            print_json(&json!(rows));
        }
    }
    Ok(())
}

fn cmd_compare(path: &Path, g: &GlobalArgs, cfg: &RunConfig) -> Result<(), Failure> {
    let ds = load_dataset(path, None)?;
    let table = run_comparison(&ds, cfg)?;
    match g.format {
        Format::Text => out!("{}", table.render_text(cfg.averaging)),
        Format::Json => print_json(&to_json(&table)),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let g = &cli.global;
    let cfg = resolve_config(g)?;
    log::debug!("averaging {:?}, seed {}", cfg.averaging, cfg.seed);
    match &cli.command {
        Command::Ingest {
            input,
            input_format,
            out,
        } => cmd_ingest(input, input_format.as_deref(), out.as_deref()),
        Command::Inspect { dataset } => cmd_inspect(dataset, g, &cfg),
        Command::Split {
            dataset,
            train_out,
            test_out,
        } => cmd_split(dataset, train_out.as_deref(), test_out.as_deref(), g, &cfg),
        Command::Train {
            dataset,
            featurizer,
            model,
            out,
        } => cmd_train(dataset, featurizer.as_deref(), model.as_deref(), out, g, cfg.clone()),
        Command::Evaluate { artifact, dataset } => cmd_evaluate(artifact, dataset, g, &cfg),
        Command::Predict { artifact, text, file } => cmd_predict(artifact, text, file.as_deref(), g),
        Command::Compare { dataset } => cmd_compare(dataset, g, &cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Artifact(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
