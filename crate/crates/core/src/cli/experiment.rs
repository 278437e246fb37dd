use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::error::{create_dir, seeded, to_json, write_file, CliError, CliResult, StageExt};
use crate::detect::encode_ppm;
use crate::evalkit::{compare_runs, stratified_split_labels, synth_dataset, DeltaReport, RunMetrics, Split, SplitAssignment, SynthConfig, SynthDataset};
use crate::imaging::Frame;
use crate::nnet::{frames_to_tensor, predict_classes, train, EpochMetrics, LabeledData, NetSpec, TrainConfig};
use crate::rng::derive_seed;

/// Outcome of one variant of the experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantResult {
    pub variant: String,
    pub history: Vec<EpochMetrics>,
    pub test: RunMetrics,
    pub confusion_csv: Option<String>,
    pub confusion_ppm: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub spec: NetSpec,
    pub train: TrainConfig,
    pub split: SplitAssignment,
    pub full: VariantResult,
    pub cropped: VariantResult,
    /// `cropped − full`.
    pub delta: DeltaReport,
}

/// Trains the same spec on whole frames and on crops of the same images, with one
/// shared split, and compares the test results.
pub fn experiment_full_vs_cropped(cfg: &RunConfig, out: Option<&Path>) -> CliResult<ExperimentReport> {
    cfg.validate()?;
    let tree = cfg.load_taxonomy()?;
    let classes = tree.species_count().min(crate::evalkit::synth::MAX_CLASSES);
    let names: Vec<String> = tree.species_names().into_iter().take(classes).map(String::from).collect();
    let spec = match &cfg.net_spec {
        Some(_) => cfg.load_spec(tree.species_count())?,
        None => NetSpec::desk_reference(classes),
    };
    if spec.classes != classes {
        return Err(CliError::Config(format!("experiment uses {classes} synthetic classes, net spec has {}", spec.classes)));
    }
    let synth = SynthConfig {
        counts: vec![cfg.experiment.images_per_class; classes],
        frame_size: cfg.experiment.frame_size,
        image_size: spec.input[1],
        seed: derive_seed(cfg.seed, "experiment-data", 0),
        ..cfg.synth.clone()
    };
    let data = synth_dataset(&synth).stage("synthesize")?;
    let labels = data.labels();
    let split = stratified_split_labels(&labels, classes, cfg.split, derive_seed(cfg.seed, "experiment-split", 0)).stage("split")?;
    let train_cfg = TrainConfig { seed: derive_seed(cfg.seed, "experiment-train", 0), ..cfg.train.clone() };
    if let Some(dir) = out {
        create_dir(dir)?;
    }
    let run = |variant: &str, pick: fn(&crate::evalkit::SynthItem) -> &Frame| -> CliResult<VariantResult> {
        run_variant(&data, &split, &spec, &train_cfg, &names, variant, pick, out, cfg.seed)
    };
    let full = run("full", |i| &i.full)?;
    let cropped = run("cropped", |i| &i.cropped)?;
    let delta = compare_runs(&full.test, &cropped.test).stage("compare")?;
    let report = ExperimentReport { seed: cfg.seed, spec, train: train_cfg, split, full, cropped, delta };
    if let Some(dir) = out {
        write_file(&dir.join("comparison.json"), to_json(&seeded(&report.delta, cfg.seed)))?;
        write_file(&dir.join("experiment.json"), to_json(&report))?;
    }
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn run_variant(
    data: &SynthDataset,
    split: &SplitAssignment,
    spec: &NetSpec,
    train_cfg: &TrainConfig,
    names: &[String],
    variant: &str,
    pick: fn(&crate::evalkit::SynthItem) -> &Frame,
    out: Option<&Path>,
    seed: u64,
) -> CliResult<VariantResult> {
    let subset = |s: Split| -> CliResult<LabeledData> {
        let idx = split.indices(s);
        let frames: Vec<Frame> = idx.iter().map(|&i| pick(&data.items[i]).clone()).collect();
        let labels = idx.iter().map(|&i| data.items[i].class_id).collect();
        LabeledData::new(frames_to_tensor(&frames).stage("train")?, labels).stage("train")
    };
    let (tr, va, te) = (subset(Split::Train)?, subset(Split::Val)?, subset(Split::Test)?);
    let (params, history) = train(spec, &tr, Some(&va), train_cfg).stage("train")?;
    let preds = predict_classes(spec, &params, &te.inputs).stage("evaluate")?;
    let test = RunMetrics::new(&preds, &te.labels, names).stage("evaluate")?;
    let (mut csv, mut ppm) = (None, None);
    if let Some(dir) = out {
        let c = format!("confusion_{variant}.csv");
        let p = format!("confusion_{variant}.ppm");
        write_file(&dir.join(&c), test.confusion.to_csv(names))?;
        write_file(&dir.join(&p), encode_ppm(&test.confusion.heatmap(8)).stage("write")?)?;
        write_file(&dir.join(format!("metrics_{variant}.json")), to_json(&seeded(&test, seed)))?;
        csv = Some(c);
        ppm = Some(p);
    }
    Ok(VariantResult { variant: variant.to_string(), history, test, confusion_csv: csv, confusion_ppm: ppm })
}
