//! The `insect-vision` command line.
//!
//! Every subcommand accepts `--seed`, `--out DIR`, `--config FILE` and `--json`.
//! Flags override values from the config file. Exit codes: 0 success, 2 config
//! error, 3 data error, 4 stage failure.

mod commands;
mod config;
mod error;
mod experiment;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub use config::{ExperimentConfig, MaskSource, PipelineConfig, RunConfig};
pub use error::{CliError, CliResult};
pub use experiment::{experiment_full_vs_cropped, ExperimentReport, VariantResult};
pub use pipeline::{replay, run_pipeline, CropPrediction, PipelineMetrics, RunRecord, METRICS, RUN_RECORD};

#[derive(Debug, Parser)]
#[command(name = "insect-vision", version, about = "Insect capture, cropping and classification pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Master seed for every random draw.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Print machine-readable JSON.
    #[arg(long, global = true)]
    pub json: bool,
    /// Taxonomy file (defaults to the bundled 16-species table).
    #[arg(long, global = true)]
    pub taxonomy: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Imaging design numbers: magnification, diffraction, depth of field, motion blur.
    Optics(commands::OpticsArgs),
    /// Writes a synthetic insect transit as numbered PPM frames plus a JSON sidecar.
    Simulate(commands::SimulateArgs),
    /// Finds brightness triggers in a luminance series.
    Trigger(commands::TriggerArgs),
    /// Crops the insect from a frame using a mask or a threshold.
    Detect(commands::DetectArgs),
    /// Stratified train/val/test split of a manifest.
    Split(commands::SplitArgs),
    /// Writes a synthetic insect dataset with full and cropped variants.
    Synth(commands::SynthArgs),
    /// Trains a network on a manifest.
    Train(commands::TrainArgs),
    /// Classifies one image.
    Predict(commands::PredictArgs),
    /// Rolls a species probability vector up the taxonomy and decides a rank.
    Rollup(commands::RollupArgs),
    /// Evaluates trained parameters on a manifest split.
    Eval(commands::EvalArgs),
    /// Compares two metrics files (second minus first).
    Compare(commands::CompareArgs),
    /// Runs simulate, trigger, detect, predict, rollup and evaluate end to end.
    Pipeline(commands::PipelineArgs),
    /// Trains on full frames and on crops of the same images and compares them.
    Experiment(commands::ExperimentArgs),
}

/// Output of a command: JSON for `--json`, text otherwise.
pub struct Report {
    pub json: serde_json::Value,
    pub text: String,
}

/// Loads the config file and applies the global flags.
pub fn base_config(g: &GlobalArgs) -> CliResult<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if g.out.is_some() {
        cfg.out = g.out.clone();
    }
    if g.taxonomy.is_some() {
        cfg.taxonomy = g.taxonomy.clone();
    }
    Ok(cfg)
}

pub fn run(cli: Cli) -> CliResult<Report> {
    let cfg = base_config(&cli.global)?;
    let seed = cfg.seed;
    let mut report = match cli.command {
        Command::Optics(a) => commands::optics(cfg, a),
        Command::Simulate(a) => commands::simulate(cfg, a),
        Command::Trigger(a) => commands::trigger(cfg, a),
        Command::Detect(a) => commands::detect(cfg, a),
        Command::Split(a) => commands::split(cfg, a),
        Command::Synth(a) => commands::synth(cfg, a),
        Command::Train(a) => commands::train(cfg, a),
        Command::Predict(a) => commands::predict(cfg, a),
        Command::Rollup(a) => commands::rollup(cfg, a),
        Command::Eval(a) => commands::eval(cfg, a),
        Command::Compare(a) => commands::compare(cfg, a),
        Command::Pipeline(a) => commands::pipeline(cfg, a),
        Command::Experiment(a) => commands::experiment(cfg, a),
    }?;
    report.json = error::seeded(&report.json, seed);
    Ok(report)
}

/// Parses `args`, runs the command and prints its report.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let json = cli.global.json;
    match run(cli) {
        Ok(r) => {
            if json {
                println!("{}", serde_json::to_string_pretty(&r.json).expect("JSON value"));
            } else {
                print!("{}", r.text);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn main() -> ExitCode {
    main_with_args(std::env::args_os())
}
