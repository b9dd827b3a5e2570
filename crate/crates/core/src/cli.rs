//! Command-line driver.
//!
//! Every subcommand flag can also be given in a `--config FILE` of
//! `key = value` lines (keys are flag names without the dashes, `#` starts a
//! comment). Flags on the command line win over the file. Exit status is 0 on
//! success, 1 on usage errors and 2 on data errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgAction, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::classifier::{FeatureKind, LrSchedule, TrainConfig};
use crate::experiment::{
    extract_manifest, fit_model, run_experiment, ExperimentConfig, ExtractConfig, FeaturePipeline,
    PipelineConfig, TrainedModel,
};
use crate::features::{FeatureSet, Record};
use crate::filtration::{height_field, make_directions};
use crate::manifest::{load_csv_manifest, load_flat_manifest, load_manifest};
use crate::mask::{load_mask, normalize_mask, DEFAULT_THRESHOLD};
use crate::persistence::{compute_pd0, write_pd_text};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "shapetopo", version, about = "Topological shape recognition from binary masks")]
#[command(args_override_self = true)]
pub struct Cli {
    /// File of `key = value` defaults for the subcommand's flags.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute persistence diagrams for every mask of a dataset.
    Extract(ExtractArgs),
    /// Fit the sparse sampler on all records of a feature file.
    FitSampler(FitSamplerArgs),
    /// Cross-validate a classifier and save one model per fold.
    Train(TrainArgs),
    /// Score a saved model on a feature file.
    Eval(EvalArgs),
    /// Print the persistence diagram of one mask.
    Pd(PdArgs),
    /// Tabulate the summaries of finished training runs.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Layout {
    /// One subdirectory per class.
    Dir,
    /// All images in one directory, class = file stem before the last `-`.
    Flat,
}

#[derive(Debug, clap::Args)]
#[command(args_override_self = true)]
pub struct ExtractArgs {
    /// Dataset root (or base directory for relative paths in --manifest).
    #[arg(long)]
    pub data: PathBuf,
    /// CSV manifest with a `path,label` header.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "dir")]
    pub layout: Layout,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub directions: usize,
    #[arg(long, default_value_t = 125)]
    pub size: usize,
    #[arg(long, default_value_t = 50)]
    pub pi_grid: usize,
    #[arg(long, default_value_t = 10.0)]
    pub pi_spread: f64,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: u8,
    /// Skip the three rotated copies of each mask.
    #[arg(long)]
    pub no_augment: bool,
}

#[derive(Debug, clap::Args)]
#[command(args_override_self = true)]
pub struct FitSamplerArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LrPreset {
    /// Final 100 epochs at 1e-4.
    Reference,
    /// Final 100 epochs at 1e-6.
    Strict,
}

#[derive(Debug, clap::Args)]
#[command(args_override_self = true)]
pub struct TrainArgs {
    #[arg(long)]
    pub features: PathBuf,
    /// amplitude or sparse-pi.
    #[arg(long)]
    pub kind: FeatureKind,
    /// Number of folds; 1 trains a single model on every sample.
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 800)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    /// Learning-rate schedule, stretched or squeezed to --epochs.
    #[arg(long, value_enum, default_value = "reference")]
    pub lr_preset: LrPreset,
    /// Feed raw features to the network instead of z-scores.
    #[arg(long)]
    pub no_standardize: bool,
}

#[derive(Debug, clap::Args)]
#[command(args_override_self = true)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    /// JSON metrics report.
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, clap::Args)]
#[command(args_override_self = true)]
pub struct PdArgs {
    #[arg(long)]
    pub mask: PathBuf,
    /// Direction index; all directions when omitted.
    #[arg(long)]
    pub direction: Option<usize>,
    #[arg(long, default_value_t = 8)]
    pub directions: usize,
    #[arg(long, default_value_t = 125)]
    pub size: usize,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: u8,
    /// Use the mask as loaded, without cropping and resizing.
    #[arg(long)]
    pub no_normalize: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TableFormat {
    Csv,
    Md,
}

#[derive(Debug, clap::Args)]
#[command(args_override_self = true)]
pub struct ReportArgs {
    /// A run directory, or a directory of run directories.
    #[arg(long)]
    pub runs: PathBuf,
    #[arg(long, value_enum, default_value = "md")]
    pub format: TableFormat,
}

/// Failure of a CLI invocation, split by exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Data(Error::Config(_)) => 1,
            CliError::Data(_) => 2,
        }
    }
}

fn config_value(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("{}:{}: expected key = value", path.display(), n + 1))
        })?;
        let v = v.trim().trim_matches('"');
        pairs.push((k.trim().replace('_', "-"), v.to_owned()));
    }
    Ok(pairs)
}

/// Splices config-file entries in right after the subcommand name so that
/// later command-line flags override them.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut config = None;
    let mut i = 0;
    while i < args.len() {
        let a = args[i].to_string_lossy();
        if a == "--config" {
            config = args.get(i + 1).map(PathBuf::from);
        } else if let Some(p) = a.strip_prefix("--config=") {
            config = Some(PathBuf::from(p));
        }
        i += 1;
    }
    let Some(path) = config else {
        return Ok(args);
    };
    let cmd = Cli::command();
    let Some((pos, sub)) = args.iter().enumerate().skip(1).find_map(|(i, a)| {
        cmd.find_subcommand(a.to_string_lossy().as_ref()).map(|s| (i, s.clone()))
    }) else {
        return Ok(args);
    };
    let all_flags: Vec<String> = cmd
        .get_subcommands()
        .flat_map(|s| s.get_arguments().filter_map(|a| a.get_long().map(str::to_owned)).collect::<Vec<_>>())
        .collect();
    let mut injected = Vec::new();
    for (key, value) in config_value(&path)? {
        let Some(arg) = sub.get_arguments().find(|a| a.get_long() == Some(key.as_str())) else {
            if all_flags.contains(&key) {
                continue;
            }
            return Err(CliError::Usage(format!("unknown config key `{key}`")));
        };
        let is_switch = matches!(arg.get_action(), ArgAction::SetTrue);
        if is_switch {
            match value.as_str() {
                "true" | "1" | "yes" => injected.push(OsString::from(format!("--{key}"))),
                "false" | "0" | "no" => {}
                other => return Err(CliError::Usage(format!("config key `{key}`: not a boolean: {other}"))),
            }
        } else {
            injected.push(OsString::from(format!("--{key}")));
            injected.push(OsString::from(value));
        }
    }
    let mut out = args[..=pos].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[pos + 1..]);
    Ok(out)
}

/// Parses `args` (including the program name) and runs the command, writing
/// human-readable output to `out`. Returns the process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cmd: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::Extract(a) => extract(a, out),
        Command::FitSampler(a) => fit_sampler(a, out),
        Command::Train(a) => train_cmd(a, out),
        Command::Eval(a) => eval(a, out),
        Command::Pd(a) => pd(a, out),
        Command::Report(a) => report(a, out),
    }
}

fn io(e: std::io::Error) -> CliError {
    CliError::Data(Error::Io(e))
}

fn extract(a: ExtractArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if a.directions == 0 || a.pi_grid == 0 || !(a.pi_spread > 0.0) || a.size < 2 {
        return Err(CliError::Usage(
            "--directions and --pi-grid must be positive, --pi-spread > 0, --size >= 2".into(),
        ));
    }
    let manifest = match (&a.manifest, a.layout) {
        (Some(csv), _) => load_csv_manifest(csv, &a.data, a.size)?,
        (None, Layout::Dir) => load_manifest(&a.data, a.size)?,
        (None, Layout::Flat) => load_flat_manifest(&a.data, a.size)?,
    };
    let cfg = ExtractConfig {
        directions: a.directions,
        image_size: a.size,
        pi_grid: a.pi_grid,
        pi_spread: a.pi_spread,
        threshold: a.threshold,
        augment: !a.no_augment,
    };
    let set = extract_manifest(&manifest, &cfg)?;
    set.save(&a.out)?;
    writeln!(
        out,
        "{} masks, {} classes, {} records -> {}",
        set.samples.len(),
        set.classes.len(),
        set.records.len(),
        a.out.display()
    )
    .map_err(io)
}

fn fit_sampler(a: FitSamplerArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let set = FeatureSet::load(&a.features)?;
    let records: Vec<&Record> = set.records.iter().collect();
    let cfg = PipelineConfig {
        standardize: false,
        ..PipelineConfig::from_features(&set)
    };
    let (pipeline, _) = FeaturePipeline::fit(FeatureKind::SparsePi, &set, &records, &cfg)?;
    let sampler = pipeline.sampler.expect("sparse pipeline has a sampler");
    sampler.save(&a.out)?;
    let ranks: Vec<String> = sampler.directions.iter().map(|d| d.rank.to_string()).collect();
    writeln!(
        out,
        "ranks [{}], {} features -> {}",
        ranks.join(", "),
        sampler.feature_len(),
        a.out.display()
    )
    .map_err(io)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Data(Error::Config(format!("cannot serialize: {e}"))))?;
    text.push('\n');
    std::fs::write(path, text).map_err(io)
}

#[derive(Serialize)]
struct FoldFile<'a> {
    #[serde(flatten)]
    report: &'a crate::experiment::FoldReport,
    loss_curve: &'a [f64],
}

#[derive(Serialize)]
struct FullFit<'a> {
    kind: &'a str,
    seed: u64,
    epochs: usize,
    samples: usize,
    input_dim: usize,
    loss_curve: &'a [f64],
}

fn train_cmd(a: TrainArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if a.folds == 0 || a.epochs == 0 || a.batch_size == 0 {
        return Err(CliError::Usage("--folds, --epochs and --batch-size must be positive".into()));
    }
    let set = FeatureSet::load(&a.features)?;
    let schedule = match a.lr_preset {
        LrPreset::Reference => LrSchedule::reference(),
        LrPreset::Strict => LrSchedule::reference_strict(),
    }
    .compressed(a.epochs);
    let train = TrainConfig {
        epochs: a.epochs,
        schedule,
        batch_size: a.batch_size,
        seed: a.seed,
        ..Default::default()
    };
    let pipeline = PipelineConfig {
        standardize: !a.no_standardize,
        ..PipelineConfig::from_features(&set)
    };
    std::fs::create_dir_all(&a.out).map_err(io)?;

    if a.folds == 1 {
        if set.classes.len() < 2 {
            return Err(CliError::Data(Error::Config("training needs at least two classes".into())));
        }
        let all: Vec<usize> = (0..set.samples.len()).collect();
        let (model, curve) = fit_model(&set, &all, a.kind, &pipeline, &train)?;
        model.save(a.out.join("full.model"))?;
        write_json(
            &a.out.join("full.json"),
            &FullFit {
                kind: a.kind.name(),
                seed: a.seed,
                epochs: a.epochs,
                samples: set.samples.len(),
                input_dim: model.pipeline.input_dim(),
                loss_curve: &curve,
            },
        )?;
        return writeln!(out, "trained on {} samples -> {}", set.samples.len(), a.out.display()).map_err(io);
    }

    let cfg = ExperimentConfig {
        kind: a.kind,
        folds: a.folds,
        seed: a.seed,
        pipeline,
        train,
    };
    let result = run_experiment(&set, &cfg)?;
    for f in &result.folds {
        let i = f.report.fold;
        if let Some(m) = &f.model {
            m.save(a.out.join(format!("fold{i}.model")))?;
        }
        write_json(
            &a.out.join(format!("fold{i}.json")),
            &FoldFile {
                report: &f.report,
                loss_curve: &f.loss_curve,
            },
        )?;
        writeln!(out, "fold {i}: accuracy {:.4}", f.report.metrics.accuracy).map_err(io)?;
    }
    write_json(&a.out.join("folds.json"), &result.plan)?;
    write_json(&a.out.join("summary.json"), &result.summary)?;
    let agg = &result.summary.aggregate;
    writeln!(
        out,
        "{}: accuracy {}, weighted F1 {}",
        a.kind, agg.accuracy, agg.weighted_f1
    )
    .map_err(io)
}

fn eval(a: EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let model = TrainedModel::load(&a.model)?;
    let set = FeatureSet::load(&a.features)?;
    let report = model.evaluate(&set)?;
    write_json(&a.report, &report)?;
    writeln!(
        out,
        "accuracy {:.4}, weighted F1 {:.4}, weighted precision {:.4}, weighted recall {:.4}",
        report.accuracy, report.weighted_f1, report.weighted_precision, report.weighted_recall
    )
    .map_err(io)
}

fn pd(a: PdArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if a.directions == 0 {
        return Err(CliError::Usage("--directions must be positive".into()));
    }
    if let Some(k) = a.direction {
        if k >= a.directions {
            return Err(CliError::Usage(format!(
                "--direction {k} out of range for {} directions",
                a.directions
            )));
        }
    }
    let mut mask = load_mask(&a.mask, a.threshold)?;
    if !a.no_normalize {
        mask = normalize_mask(&mask, a.size)?;
    }
    let dirs = make_directions(a.directions);
    let diagrams: Vec<_> = dirs
        .iter()
        .filter(|d| a.direction.is_none_or(|k| k == d.index))
        .map(|&d| compute_pd0(&height_field(&mask, d)))
        .collect();
    out.write_all(write_pd_text(&diagrams, &a.mask.display().to_string()).as_bytes())
        .map_err(io)
}

fn run_dirs(root: &Path) -> Result<Vec<(String, PathBuf)>, CliError> {
    let name = |p: &Path| {
        p.file_name()
            .map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
    };
    if root.join("summary.json").is_file() {
        return Ok(vec![(name(root), root.join("summary.json"))]);
    }
    let mut runs = Vec::new();
    for entry in std::fs::read_dir(root).map_err(io)? {
        let p = entry.map_err(io)?.path();
        if p.join("summary.json").is_file() {
            runs.push((name(&p), p.join("summary.json")));
        }
    }
    runs.sort();
    if runs.is_empty() {
        return Err(CliError::Data(Error::EmptyDataset(root.to_path_buf())));
    }
    Ok(runs)
}

const METRIC_COLUMNS: [(&str, &str); 4] = [
    ("weighted_f1", "Weighted F1"),
    ("weighted_precision", "Weighted precision"),
    ("weighted_recall", "Weighted recall"),
    ("accuracy", "Accuracy"),
];

fn report(a: ReportArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let bad = |p: &Path, why: String| {
        CliError::Data(Error::Format {
            what: "summary",
            reason: format!("{}: {why}", p.display()),
        })
    };
    let mut rows = Vec::new();
    for (name, path) in run_dirs(&a.runs)? {
        let text = std::fs::read_to_string(&path).map_err(io)?;
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(&path, e.to_string()))?;
        let kind = v["kind"].as_str().unwrap_or("?").to_owned();
        let folds = v["folds"].as_u64().unwrap_or(0);
        let mut stats = Vec::new();
        for (key, _) in METRIC_COLUMNS {
            let m = &v["aggregate"][key];
            let (Some(mean), Some(std)) = (m["mean"].as_f64(), m["std"].as_f64()) else {
                return Err(bad(&path, format!("missing {key}")));
            };
            stats.push((mean, std));
        }
        rows.push((name, kind, folds, stats));
    }
    let w = |r: std::io::Result<()>| r.map_err(io);
    match a.format {
        TableFormat::Csv => {
            let mut header = vec!["run".to_owned(), "kind".into(), "folds".into()];
            for (key, _) in METRIC_COLUMNS {
                header.push(format!("{key}_mean"));
                header.push(format!("{key}_std"));
            }
            w(writeln!(out, "{}", header.join(",")))?;
            for (name, kind, folds, stats) in &rows {
                let cells: Vec<String> = stats.iter().map(|(m, s)| format!("{m:.6},{s:.6}")).collect();
                w(writeln!(out, "{name},{kind},{folds},{}", cells.join(",")))?;
            }
        }
        TableFormat::Md => {
            let titles: Vec<&str> = METRIC_COLUMNS.iter().map(|c| c.1).collect();
            w(writeln!(out, "| Run | Features | Folds | {} |", titles.join(" | ")))?;
            w(writeln!(out, "|---|---|---|{}", "---|".repeat(titles.len())))?;
            for (name, kind, folds, stats) in &rows {
                let cells: Vec<String> = stats.iter().map(|(m, s)| format!("{m:.2} ± {s:.2}")).collect();
                w(writeln!(out, "| {name} | {kind} | {folds} | {} |", cells.join(" | ")))?;
            }
        }
    }
    Ok(())
}
