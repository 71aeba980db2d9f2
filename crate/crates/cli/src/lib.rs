//! Command implementations behind the `ftlearn` binary.
//!
//! Every command records a [`RunManifest`] with the effective settings,
//! SHA-256 digests of its inputs and the outcome of each tree it tried to
//! learn. Commands that write files put the manifest beside their main
//! output; the others write [`manifest::DEFAULT_MANIFEST`] in the working
//! directory unless `--manifest` says otherwise.

pub mod manifest;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use ftlearn::threshold::{threshold_all, SkippedSensor};
use ftlearn::tree::FORMAT_VERSION;
use ftlearn::{
    ingest, learn, learn_all, recovery_report, synthetic, Dataset, DotOptions, FaultTree, GroundTruth,
    LearnerConfig, SchemaConfig, Statistic, Threshold,
};

pub use manifest::{RunManifest, Status, TreeOutcome};
use manifest::{beside, read_input, InputDigest, DEFAULT_MANIFEST};

pub const SUMMARY_HEADER: &str = "failure,statistic,significance,depth,gates,runtime_ms,status";
pub const THREADS_ENV: &str = "FTLEARN_THREADS";

#[derive(Debug, Parser)]
#[command(name = "ftlearn", version, about = "Learn static fault trees from sensor and failure data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn the information-gain-optimal threshold of every sensor.
    Thresholds(ThresholdsArgs),
    /// Learn one fault tree for a failure column.
    Learn(LearnArgs),
    /// Learn a tree for every failure column and statistic.
    LearnAll(LearnAllArgs),
    /// Sample a CSV dataset from a ground-truth tree.
    Generate(GenerateArgs),
    /// Compare a learned tree with the ground truth it was sampled from.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// Input CSV file.
    pub csv: PathBuf,
    /// TOML schema describing the CSV columns.
    pub schema: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ThresholdsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub failure: String,
    #[arg(long, default_value = "min")]
    pub stat: Statistic,
    /// Write the JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LearnArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub failure: String,
    #[arg(long, default_value = "min")]
    pub stat: Statistic,
    /// Overrides the schema's learner section (default 3).
    #[arg(long)]
    pub max_inputs: Option<usize>,
    /// Floor for the top gate's phi (default 0).
    #[arg(long, allow_hyphen_values = true)]
    pub min_significance: Option<f64>,
    #[arg(long)]
    pub out_dot: Option<PathBuf>,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
    /// Annotate basic events with their threshold's information gain.
    #[arg(long)]
    pub show_gain: bool,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LearnAllArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub max_inputs: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub min_significance: Option<f64>,
    #[arg(long)]
    pub show_gain: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenerateArgs {
    /// Ground-truth JSON file.
    pub ground_truth: PathBuf,
    /// Defaults to n_units * days_per_unit.
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Where to write the matching schema (default: next to --out).
    #[arg(long)]
    pub schema_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    pub learned: PathBuf,
    pub ground_truth: PathBuf,
    /// Also write the report as JSON.
    #[arg(long)]
    pub out_json: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

/// Sizes the global thread pool from `FTLEARN_THREADS` (unset or 0: one
/// thread per core). An unparsable value is a usage error.
pub fn configure_threads() -> Result<usize, String> {
    let n = match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map_err(|_| format!("{THREADS_ENV} must be a non-negative integer, got `{v}`"))?,
        _ => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())?;
    Ok(rayon::current_num_threads())
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<RunManifest> {
    match &cli.command {
        Command::Thresholds(a) => cmd_thresholds(a, out),
        Command::Learn(a) => cmd_learn(a, out),
        Command::LearnAll(a) => cmd_learn_all(a, out),
        Command::Generate(a) => cmd_generate(a, out),
        Command::Eval(a) => cmd_eval(a, out),
    }
}

struct Loaded {
    schema: SchemaConfig,
    data: Dataset,
    inputs: Vec<InputDigest>,
}

/// Reads schema and CSV, then drops duplicate keys and out-of-range rows.
fn load(args: &DataArgs) -> Result<Loaded> {
    let mut inputs = Vec::new();
    let schema_bytes = read_input(&args.schema, &mut inputs)?;
    let schema_text = String::from_utf8(schema_bytes).context("schema is not UTF-8")?;
    let schema = SchemaConfig::from_toml(&schema_text).with_context(|| format!("in {}", args.schema.display()))?;
    let csv = read_input(&args.csv, &mut inputs)?;
    let data = ingest::read_csv(csv.as_slice(), &schema).with_context(|| format!("in {}", args.csv.display()))?;
    let data = ingest::filter_corrupt(&ingest::deduplicate(&data), &schema);
    Ok(Loaded { schema, data, inputs })
}

/// Flags override the schema's `[learner]` section, which overrides defaults.
fn learner_config(
    schema: &SchemaConfig,
    statistic: Statistic,
    max_inputs: Option<usize>,
    min_significance: Option<f64>,
) -> Result<LearnerConfig> {
    let section = schema.learner.clone().unwrap_or_default();
    let defaults = LearnerConfig::default();
    let config = LearnerConfig {
        max_inputs: max_inputs.or(section.max_inputs).unwrap_or(defaults.max_inputs),
        min_top_significance: min_significance
            .or(section.min_top_significance)
            .unwrap_or(defaults.min_top_significance),
        statistic,
        random_seed: section.random_seed.unwrap_or(defaults.random_seed),
    };
    config.validate()?;
    Ok(config)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn require_failure(data: &Dataset, name: &str) -> Result<()> {
    if data.failure(name).is_none() {
        let known: Vec<&str> = data.failures().iter().map(|f| f.name.as_str()).collect();
        bail!("unknown failure column `{name}` (known: {})", known.join(", "));
    }
    Ok(())
}

fn outcome_ok(tree: &FaultTree, statistic: Statistic, runtime_ms: f64) -> Result<TreeOutcome> {
    Ok(TreeOutcome {
        failure: tree.failure.clone(),
        statistic: statistic.to_string(),
        status: Status::Ok,
        significance: Some(tree.significance),
        depth: Some(tree.depth()?),
        gates: Some(tree.gates.len()),
        runtime_ms,
        skip_reason: None,
    })
}

fn outcome_skipped(failure: &str, statistic: Statistic, runtime_ms: f64, reason: String) -> TreeOutcome {
    TreeOutcome {
        failure: failure.to_string(),
        statistic: statistic.to_string(),
        status: Status::Skipped,
        significance: None,
        depth: None,
        gates: None,
        runtime_ms,
        skip_reason: Some(reason),
    }
}

#[derive(Debug, Serialize)]
struct ThresholdsDoc<'a> {
    format_version: u32,
    failure: &'a str,
    statistic: Statistic,
    thresholds: Vec<Threshold>,
    skipped: Vec<SkippedSensor>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
}

pub fn cmd_thresholds(args: &ThresholdsArgs, out: &mut dyn Write) -> Result<RunManifest> {
    let loaded = load(&args.data)?;
    require_failure(&loaded.data, &args.failure)?;
    let mut doc = ThresholdsDoc {
        format_version: FORMAT_VERSION,
        failure: &args.failure,
        statistic: args.stat,
        thresholds: Vec::new(),
        skipped: Vec::new(),
        reason: None,
    };
    match ingest::balance(&loaded.data, &args.failure) {
        Ok(balanced) => {
            let report = threshold_all(&balanced, args.stat);
            doc.thresholds = report.thresholds;
            doc.skipped = report.skipped;
        }
        Err(e) if e.is_skip() => doc.reason = Some(e.to_string()),
        Err(e) => return Err(e.into()),
    }
    let text = serde_json::to_string_pretty(&doc)? + "\n";

    let mut manifest = RunManifest::new(
        "thresholds",
        json!({ "args": args, "schema": loaded.schema }),
    );
    manifest.inputs = loaded.inputs;
    let manifest_path = match &args.out {
        Some(path) => {
            write_file(path, &text)?;
            manifest.outputs.push(path.clone());
            beside(path)
        }
        None => {
            out.write_all(text.as_bytes())?;
            PathBuf::from(DEFAULT_MANIFEST)
        }
    };
    manifest.write(args.manifest.as_deref().unwrap_or(&manifest_path))?;
    Ok(manifest)
}

pub fn cmd_learn(args: &LearnArgs, out: &mut dyn Write) -> Result<RunManifest> {
    let loaded = load(&args.data)?;
    let config = learner_config(&loaded.schema, args.stat, args.max_inputs, args.min_significance)?;
    require_failure(&loaded.data, &args.failure)?;

    let mut manifest = RunManifest::new(
        "learn",
        json!({ "args": args, "learner": config, "schema": loaded.schema }),
    );
    manifest.inputs = loaded.inputs;

    let start = Instant::now();
    let result = ingest::balance(&loaded.data, &args.failure).and_then(|b| learn(&b, &config));
    let runtime_ms = TreeOutcome::runtime(start.elapsed());
    match result {
        Ok(learned) => {
            let tree = learned.tree;
            if let Some(path) = &args.out_dot {
                write_file(path, &tree.to_dot(DotOptions { show_gain: args.show_gain }))?;
                manifest.outputs.push(path.clone());
            }
            if let Some(path) = &args.out_json {
                write_file(path, &tree.to_json())?;
                manifest.outputs.push(path.clone());
            }
            let outcome = outcome_ok(&tree, args.stat, runtime_ms)?;
            writeln!(out, "significance: {}", tree.significance)?;
            writeln!(out, "depth: {}", outcome.depth.unwrap_or(0))?;
            writeln!(out, "gates: {}", tree.gates.len())?;
            manifest.outcomes.push(outcome);
        }
        Err(e) if e.is_skip() => {
            writeln!(out, "skipped: {e}")?;
            manifest.outcomes.push(outcome_skipped(&args.failure, args.stat, runtime_ms, e.to_string()));
        }
        Err(e) => return Err(e.into()),
    }

    let default = args
        .out_json
        .as_deref()
        .or(args.out_dot.as_deref())
        .map(beside)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_MANIFEST));
    manifest.write(args.manifest.as_deref().unwrap_or(&default))?;
    Ok(manifest)
}

/// File stem for a (failure, statistic) tree inside an output directory.
pub fn tree_stem(failure: &str, statistic: Statistic) -> String {
    let safe: String = failure
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{safe}.{statistic}")
}

pub fn cmd_learn_all(args: &LearnAllArgs, out: &mut dyn Write) -> Result<RunManifest> {
    let loaded = load(&args.data)?;
    let config = learner_config(&loaded.schema, Statistic::Min, args.max_inputs, args.min_significance)?;
    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;

    let mut manifest = RunManifest::new(
        "learn-all",
        json!({ "args": args, "learner": config, "schema": loaded.schema, "statistics": Statistic::ALL }),
    );
    manifest.inputs = loaded.inputs;

    let attempts = learn_all(&loaded.data, &config, &Statistic::ALL);
    let mut summary = String::from(SUMMARY_HEADER);
    summary.push('\n');
    for a in &attempts {
        let runtime_ms = TreeOutcome::runtime(a.runtime);
        let outcome = match &a.outcome {
            Ok(tree) => {
                let stem = tree_stem(&a.failure, a.statistic);
                let json_path = args.out_dir.join(format!("{stem}.json"));
                let dot_path = args.out_dir.join(format!("{stem}.dot"));
                write_file(&json_path, &tree.to_json())?;
                write_file(&dot_path, &tree.to_dot(DotOptions { show_gain: args.show_gain }))?;
                manifest.outputs.push(json_path);
                manifest.outputs.push(dot_path);
                outcome_ok(tree, a.statistic, runtime_ms)?
            }
            Err(reason) => outcome_skipped(&a.failure, a.statistic, runtime_ms, reason.clone()),
        };
        summary.push_str(&summary_row(&outcome));
        manifest.outcomes.push(outcome);
    }

    let summary_path = args.out_dir.join("summary.csv");
    write_file(&summary_path, &summary)?;
    manifest.outputs.push(summary_path);
    out.write_all(summary.as_bytes())?;
    manifest.write(&args.out_dir.join("manifest.json"))?;
    Ok(manifest)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn summary_row(o: &TreeOutcome) -> String {
    let opt = |v: Option<String>| v.unwrap_or_default();
    format!(
        "{},{},{},{},{},{:.3},{}\n",
        csv_field(&o.failure),
        o.statistic,
        opt(o.significance.map(|s| s.to_string())),
        opt(o.depth.map(|d| d.to_string())),
        opt(o.gates.map(|g| g.to_string())),
        o.runtime_ms,
        o.status.as_str(),
    )
}

pub fn cmd_generate(args: &GenerateArgs, out: &mut dyn Write) -> Result<RunManifest> {
    let mut inputs = Vec::new();
    let bytes = read_input(&args.ground_truth, &mut inputs)?;
    let text = String::from_utf8(bytes).context("ground truth is not UTF-8")?;
    let gt = GroundTruth::from_json(&text).with_context(|| format!("in {}", args.ground_truth.display()))?;
    let data = synthetic::generate(&gt, args.rows, args.seed)?;
    let schema = gt.schema();

    let mut csv = Vec::new();
    ingest::write_csv(&data, &schema.unit_column, &schema.date_column, &mut csv)?;
    write_file(&args.out, std::str::from_utf8(&csv)?)?;
    let schema_path = args.schema_out.clone().unwrap_or_else(|| args.out.with_extension("schema.toml"));
    write_file(&schema_path, &schema.to_toml())?;
    writeln!(out, "wrote {} rows to {}", data.len(), args.out.display())?;

    let mut manifest = RunManifest::new("generate", json!({ "args": args, "rows": data.len() }));
    manifest.inputs = inputs;
    manifest.outputs = vec![args.out.clone(), schema_path];
    manifest.write(&beside(&args.out))?;
    Ok(manifest)
}

pub fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<RunManifest> {
    let mut inputs = Vec::new();
    let learned_text = String::from_utf8(read_input(&args.learned, &mut inputs)?).context("tree is not UTF-8")?;
    let learned = FaultTree::from_json(&learned_text).with_context(|| format!("in {}", args.learned.display()))?;
    let gt_text = String::from_utf8(read_input(&args.ground_truth, &mut inputs)?).context("ground truth is not UTF-8")?;
    let gt = GroundTruth::from_json(&gt_text).with_context(|| format!("in {}", args.ground_truth.display()))?;

    let report = recovery_report(&learned, &gt);
    write!(out, "{report}")?;
    let mut manifest = RunManifest::new("eval", json!({ "args": args }));
    manifest.inputs = inputs;
    let manifest_path = match &args.out_json {
        Some(path) => {
            write_file(path, &(serde_json::to_string_pretty(&report)? + "\n"))?;
            manifest.outputs.push(path.clone());
            beside(path)
        }
        None => PathBuf::from(DEFAULT_MANIFEST),
    };
    manifest.write(args.manifest.as_deref().unwrap_or(&manifest_path))?;
    Ok(manifest)
}
