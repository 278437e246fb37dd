use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{MaskSource, RunConfig};
use super::error::{create_dir, to_json, write_file, CliError, CliResult, StageExt};
use crate::detect::{crop_insect, encode_ppm, threshold_mask, BBox, CropConfig};
use crate::evalkit::synth::perturb_mask;
use crate::evalkit::{synth_dataset, RunMetrics, SynthConfig};
use crate::imaging::{ring_capacity, synth_transit_with_masks, CaptureUnit, FrameRing};
use crate::nnet::{encode_params, frames_to_tensor, load_params, predict, train, LabeledData, NetSpec, ParamSet};
use crate::rng::derive_seed;
use crate::taxonomy::{decide, rollup, Decision, ProbVector, Rank, TaxonomyTree};

/// Result for one extracted frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropPrediction {
    pub transit: usize,
    pub true_species: String,
    pub frame_index: usize,
    pub bbox: BBox,
    pub crop: String,
    pub predicted_species: String,
    pub probabilities: Vec<f64>,
    pub decision: Decision,
    /// The decided taxon lies on the true species' lineage.
    pub decision_consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineMetrics {
    pub seed: u64,
    pub transits: usize,
    pub captures: usize,
    pub crops: usize,
    pub species: RunMetrics,
    pub decisions_by_rank: BTreeMap<String, usize>,
    pub below_threshold: usize,
    pub consistent_decisions: usize,
}

/// Immutable summary of a pipeline run. Re-running `config` reproduces `metrics`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub created_unix: u64,
    pub config: RunConfig,
    pub artifacts: Vec<String>,
    pub metrics: PipelineMetrics,
}

pub const RUN_RECORD: &str = "run_record.json";
pub const METRICS: &str = "metrics.json";

struct TransitOutput {
    captures: usize,
    crops: Vec<(CropPrediction, Vec<u8>)>,
}

/// Simulates transits, triggers, crops, classifies and evaluates; everything is
/// persisted under the configured output directory.
pub fn run_pipeline(cfg: &RunConfig) -> CliResult<RunRecord> {
    cfg.validate()?;
    let tree = cfg.load_taxonomy()?;
    let k = tree.species_count();
    let spec = cfg.load_spec(k)?;
    let [_, in_h, in_w] = spec.input;
    if in_h != in_w {
        return Err(CliError::Config(format!("pipeline needs a square net input, got {in_w}x{in_h}")));
    }
    let p = &cfg.pipeline;
    if p.transits == 0 {
        return Err(CliError::Config("pipeline.transits must be positive".into()));
    }
    let classes = k.min(crate::evalkit::synth::MAX_CLASSES);
    let crop_cfg = CropConfig { target_size: in_w, ..cfg.crop.clone().unwrap_or_else(|| CropConfig::for_image(p.width, p.height)) };
    let capacity = ring_capacity(cfg.fps, cfg.ring_seconds).map_err(CliError::config)?;

    let out = cfg.out_dir(&format!("runs/pipeline-{}", cfg.seed));
    create_dir(&out.join("crops"))?;
    let mut artifacts = Vec::new();

    let params = match &cfg.params {
        Some(path) => load_params(path, &spec).map_err(CliError::config)?,
        None => {
            let params = train_classifier(cfg, &spec, classes)?;
            write_file(&out.join("params.bin"), encode_params(&params))?;
            artifacts.push("params.bin".to_string());
            params
        }
    };

    let outputs: Vec<TransitOutput> = (0..p.transits)
        .into_par_iter()
        .map(|t| run_transit(cfg, &tree, &spec, &params, &crop_cfg, capacity, classes, t))
        .collect::<CliResult<_>>()?;

    let mut predictions = Vec::new();
    let mut captures = 0;
    for o in outputs {
        captures += o.captures;
        for (pred, ppm) in o.crops {
            write_file(&out.join(&pred.crop), ppm)?;
            artifacts.push(pred.crop.clone());
            predictions.push(pred);
        }
    }

    let names: Vec<String> = tree.species_names().into_iter().map(String::from).collect();
    let labels: Vec<usize> = predictions.iter().map(|p| tree.species_index(&p.true_species).expect("known species")).collect();
    let preds: Vec<usize> = predictions.iter().map(|p| tree.species_index(&p.predicted_species).expect("known species")).collect();
    let species = RunMetrics::new(&preds, &labels, &names).stage("evaluate")?;
    let mut decisions_by_rank: BTreeMap<String, usize> = Rank::ALL.iter().map(|r| (r.to_string(), 0)).collect();
    for p in &predictions {
        *decisions_by_rank.entry(p.decision.rank.to_string()).or_default() += 1;
    }
    let metrics = PipelineMetrics {
        seed: cfg.seed,
        transits: p.transits,
        captures,
        crops: predictions.len(),
        species,
        decisions_by_rank,
        below_threshold: predictions.iter().filter(|p| p.decision.below_threshold).count(),
        consistent_decisions: predictions.iter().filter(|p| p.decision_consistent).count(),
    };

    write_file(&out.join("predictions.json"), to_json(&predictions))?;
    write_file(&out.join(METRICS), to_json(&metrics))?;
    write_file(&out.join("confusion.csv"), metrics.species.confusion.to_csv(&names))?;
    write_file(&out.join("confusion.ppm"), encode_ppm(&metrics.species.confusion.heatmap(8)).stage("write")?)?;
    artifacts.extend(["predictions.json", METRICS, "confusion.csv", "confusion.ppm"].map(String::from));

    let created_unix = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let record = RunRecord {
        run_id: format!("{created_unix}-{}", cfg.seed),
        created_unix,
        config: RunConfig { out: Some(out.clone()), ..cfg.clone() },
        artifacts,
        metrics,
    };
    write_file(&out.join(RUN_RECORD), to_json(&record))?;
    Ok(record)
}

/// Re-runs the configuration stored in a run record, optionally into another directory.
pub fn replay(record_path: &Path, out: Option<PathBuf>) -> CliResult<RunRecord> {
    let text = std::fs::read_to_string(record_path).map_err(|e| CliError::Config(format!("{}: {e}", record_path.display())))?;
    let record: RunRecord = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", record_path.display())))?;
    let mut cfg = record.config;
    if out.is_some() {
        cfg.out = out;
    }
    run_pipeline(&cfg)
}

fn train_classifier(cfg: &RunConfig, spec: &NetSpec, classes: usize) -> CliResult<ParamSet> {
    let synth = SynthConfig {
        counts: vec![cfg.pipeline.train_per_class; classes],
        image_size: spec.input[1],
        seed: derive_seed(cfg.seed, "pipeline-train-data", 0),
        ..cfg.synth.clone()
    };
    let data = synth_dataset(&synth).stage("synthesize")?;
    let frames: Vec<_> = data.items.iter().map(|i| i.cropped.clone()).collect();
    let inputs = frames_to_tensor(&frames).stage("train")?;
    let labeled = LabeledData::new(inputs, data.labels()).stage("train")?;
    let tc = crate::nnet::TrainConfig { seed: derive_seed(cfg.seed, "pipeline-train", 0), ..cfg.train.clone() };
    Ok(train(spec, &labeled, None, &tc).stage("train")?.0)
}

#[allow(clippy::too_many_arguments)]
fn run_transit(
    cfg: &RunConfig,
    tree: &TaxonomyTree,
    spec: &NetSpec,
    params: &ParamSet,
    crop_cfg: &CropConfig,
    capacity: usize,
    classes: usize,
    t: usize,
) -> CliResult<TransitOutput> {
    let p = &cfg.pipeline;
    let class_id = t % classes;
    let seed = derive_seed(cfg.seed, "pipeline-transit", t as u64);
    let transit = synth_transit_with_masks(class_id, seed, p.frames_per_transit, p.width, p.height).stage("simulate")?;

    let mut unit = CaptureUnit::new(cfg.trigger.clone(), FrameRing::new(capacity, p.width, p.height)).stage("trigger")?;
    let mut captures = Vec::new();
    for f in transit.frames.iter().cloned() {
        captures.extend(unit.push(f).stage("trigger")?);
    }
    captures.extend(unit.finish());
    if captures.is_empty() {
        return Err(CliError::Stage { stage: "trigger", message: format!("transit {t} produced no trigger") });
    }

    let true_species = tree.species_names()[class_id].to_string();
    let lineage: Vec<String> = tree.lineage(class_id).iter().map(|&id| tree.taxon(id).name.clone()).collect();
    let mut crops = Vec::new();
    for capture in &captures {
        for (&frame_index, frame) in capture.event.selected_indices.iter().zip(&capture.frames) {
            let mask = match (&p.masks, &transit.masks[frame_index]) {
                (MaskSource::Segmentation { dust }, Some(truth)) => {
                    perturb_mask(truth, crop_cfg.min_area, *dust, derive_seed(seed, "segmentation", frame_index as u64))
                }
                (MaskSource::Segmentation { .. }, None) => crate::detect::Mask::empty(frame.width(), frame.height()),
                (MaskSource::Threshold { threshold, invert }, _) => {
                    let m = threshold_mask(frame, *threshold);
                    if *invert { m.inverted() } else { m }
                }
            };
            let (bbox, crop) = crop_insect(frame, &mask, crop_cfg)
                .map_err(|e| CliError::Stage { stage: "detect", message: format!("transit {t} frame {frame_index}: {e}") })?;
            let input = frames_to_tensor(std::slice::from_ref(&crop)).stage("predict")?;
            let probs: ProbVector = predict(spec, params, &input).stage("predict")?;
            let rolled = rollup(&probs, tree).stage("rollup")?;
            let decision = decide(&rolled, cfg.decision_threshold);
            let name = format!("crops/transit{t:03}_frame{frame_index:03}.ppm");
            let ppm = encode_ppm(&crop).stage("write")?;
            crops.push((
                CropPrediction {
                    transit: t,
                    true_species: true_species.clone(),
                    frame_index,
                    bbox,
                    crop: name,
                    predicted_species: tree.species_names()[probs.argmax()].to_string(),
                    probabilities: probs.values().to_vec(),
                    decision_consistent: lineage.contains(&decision.taxon),
                    decision,
                },
                ppm,
            ));
        }
    }
    Ok(TransitOutput { captures: captures.len(), crops })
}
