//! Batch experiment command line.
//!
//! Four subcommands cover the reproduction pipeline: `extract` turns raw
//! lyric records into the features CSV, `reframe` collapses cluster labels
//! into the binary task, `synth` emits a synthetic benchmark dataset and
//! `run` trains the selected configurations and writes the report bundle.
//!
//! Every subcommand reads an optional `--config` JSON file; flags given on
//! the command line override values from the file. Exit codes: 0 success,
//! 2 config error (clap usage errors share this code), 3 data error,
//! 4 training error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use sfl_core::data::SyntheticParams;
use sfl_core::experiment::{
    run_experiment, run_extract, run_reframe, run_synth, ExperimentConfig, ExperimentError,
};

#[derive(Parser)]
#[command(
    name = "sfl",
    version,
    about = "Gated fusion lyric classifier benchmark runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract structure features from a lyric records CSV.
    Extract(ExtractArgs),
    /// Reframe cluster labels into binary hit/non-hit labels.
    Reframe(ReframeArgs),
    /// Generate a synthetic benchmark dataset.
    Synth(SynthArgs),
    /// Train the selected configurations and write the report bundle.
    Run(RunArgs),
}

#[derive(Args)]
struct ExtractArgs {
    /// JSON config file (keys: records, out).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Lyric records CSV with header id,popularity,text.
    #[arg(long)]
    records: Option<PathBuf>,
    /// Output features CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ExtractFile {
    records: Option<PathBuf>,
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReframeArgs {
    /// JSON config file (keys: clusters, labels_out, report_out).
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV carrying id and cluster_label columns.
    #[arg(long)]
    clusters: Option<PathBuf>,
    /// Output labels CSV path.
    #[arg(long)]
    labels_out: Option<PathBuf>,
    /// Output reframing report JSON path.
    #[arg(long)]
    report_out: Option<PathBuf>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ReframeFile {
    clusters: Option<PathBuf>,
    labels_out: Option<PathBuf>,
    report_out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// JSON config file (keys: n, d, separation, aux_signal,
    /// class0_fraction, seed, out_dir).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Rows to generate.
    #[arg(long)]
    n: Option<usize>,
    /// Embedding dimension.
    #[arg(long)]
    d: Option<usize>,
    /// Distance between the class centroids in embedding space.
    #[arg(long)]
    separation: Option<f64>,
    /// Strength of the class signal in the structure features.
    #[arg(long)]
    aux_signal: Option<f64>,
    /// Fraction of rows labeled Class 0.
    #[arg(long)]
    class0_fraction: Option<f64>,
    /// Generator seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SynthFile {
    n: Option<usize>,
    d: Option<usize>,
    separation: Option<f64>,
    aux_signal: Option<f64>,
    class0_fraction: Option<f64>,
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config JSON file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config file's output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Overrides the config file's global seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn config_err(msg: String) -> ExperimentError {
    ExperimentError::Config(msg)
}

fn read_config_file(path: &Path) -> Result<String, ExperimentError> {
    std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read config file {}: {e}", path.display())))
}

fn parse_file<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, ExperimentError> {
    serde_json::from_str(&read_config_file(path)?)
        .map_err(|e| config_err(format!("config file {}: {e}", path.display())))
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T, ExperimentError> {
    value.ok_or_else(|| {
        config_err(format!(
            "missing {flag}; pass --{flag} or set it in --config"
        ))
    })
}

fn cmd_extract(args: ExtractArgs) -> Result<(), ExperimentError> {
    let file: ExtractFile = match &args.config {
        Some(path) => parse_file(path)?,
        None => ExtractFile::default(),
    };
    let records = require(args.records.or(file.records), "records")?;
    let out = require(args.out.or(file.out), "out")?;
    let rows = run_extract(&records, &out)?;
    println!("wrote {rows} feature rows to {}", out.display());
    Ok(())
}

fn cmd_reframe(args: ReframeArgs) -> Result<(), ExperimentError> {
    let file: ReframeFile = match &args.config {
        Some(path) => parse_file(path)?,
        None => ReframeFile::default(),
    };
    let clusters = require(args.clusters.or(file.clusters), "clusters")?;
    let labels_out = require(args.labels_out.or(file.labels_out), "labels-out")?;
    let report_out = require(args.report_out.or(file.report_out), "report-out")?;
    let report = run_reframe(&clusters, &labels_out, &report_out)?;
    println!(
        "wrote {} (dominant cluster {}, class0_fraction {})",
        labels_out.display(),
        report.dominant_cluster_id,
        report.class0_fraction
    );
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), ExperimentError> {
    let file: SynthFile = match &args.config {
        Some(path) => parse_file(path)?,
        None => SynthFile::default(),
    };
    let defaults = SyntheticParams::default();
    let params = SyntheticParams {
        n: args.n.or(file.n).unwrap_or(defaults.n),
        d: args.d.or(file.d).unwrap_or(defaults.d),
        separation: args
            .separation
            .or(file.separation)
            .unwrap_or(defaults.separation),
        aux_signal: args
            .aux_signal
            .or(file.aux_signal)
            .unwrap_or(defaults.aux_signal),
        class0_fraction: args
            .class0_fraction
            .or(file.class0_fraction)
            .unwrap_or(defaults.class0_fraction),
        seed: args.seed.or(file.seed).unwrap_or(defaults.seed),
    };
    let out_dir = require(args.out_dir.or(file.out_dir), "out-dir")?;
    run_synth(&params, &out_dir)?;
    println!(
        "wrote synthetic dataset (n={}, d={}) to {}",
        params.n,
        params.d,
        out_dir.display()
    );
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<(), ExperimentError> {
    let mut config: ExperimentConfig = parse_file(&args.config)?;
    if let Some(output_dir) = args.output_dir {
        config.output_dir = output_dir;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let summary = run_experiment(&config)?;
    for row in &summary.table {
        println!(
            "{}: accuracy={:.5} macro_f1={:.5} mcc={:.5} brier={:.5} log_loss={:.5} ece={:.5}",
            row.ablation, row.accuracy, row.macro_f1, row.mcc, row.brier, row.log_loss, row.ece
        );
    }
    println!("reports in {}", summary.output_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Extract(args) => cmd_extract(args),
        Command::Reframe(args) => cmd_reframe(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Run(args) => cmd_run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
