use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use serde_json::json;

use super::config::{MaskSource, RunConfig};
use super::error::{create_dir, seeded, to_json, write_file, CliError, CliResult, StageExt};
use super::{experiment, pipeline, Report};
use crate::detect::{crop_insect, read_pgm_mask, read_ppm, resize_bilinear, threshold_mask, write_pgm_mask, write_ppm, Connectivity, CropConfig};
use crate::evalkit::{
    class_histogram, class_weights, compare_runs, load_manifest, oversample, stratified_split, synth_dataset, DatasetManifest, ManifestRecord,
    RunMetrics, Split, SynthConfig,
};
use crate::imaging::{detect_triggers, mean_luminance, synth_transit_with_masks};
use crate::nnet::{frames_to_tensor, load_params, predict_classes, save_params, train as train_net, LabeledData, NetSpec};
use crate::optics::design_report;
use crate::taxonomy::{decide, rollup as taxo_rollup, ProbVector, TaxonomyTree};

fn report(value: impl serde::Serialize, text: String) -> CliResult<Report> {
    Ok(Report { json: serde_json::to_value(value).expect("serializable"), text })
}

#[derive(Debug, Args)]
pub struct OpticsArgs {
    /// f-number.
    #[arg(long)]
    pub aperture: Option<f64>,
    /// Wavelength in µm.
    #[arg(long)]
    pub wavelength: Option<f64>,
    /// Pixel pitch in µm.
    #[arg(long)]
    pub pixel_pitch: Option<f64>,
    /// Sensor width in mm.
    #[arg(long)]
    pub sensor_width: Option<f64>,
    /// Field-of-view width in mm.
    #[arg(long)]
    pub fov_width: Option<f64>,
    /// Circle of confusion in µm (default: Airy diameter).
    #[arg(long)]
    pub coc: Option<f64>,
    /// Flash duration in s.
    #[arg(long)]
    pub flash: Option<f64>,
    /// Insect speed in m/s.
    #[arg(long)]
    pub speed: Option<f64>,
}

pub fn optics(mut cfg: RunConfig, a: OpticsArgs) -> CliResult<Report> {
    let o = &mut cfg.optics;
    if let Some(v) = a.aperture {
        o.aperture_number = v;
    }
    if let Some(v) = a.wavelength {
        o.wavelength = v;
    }
    if let Some(v) = a.pixel_pitch {
        o.pixel_pitch = v;
    }
    if let Some(v) = a.sensor_width {
        o.sensor_width = v;
    }
    if let Some(v) = a.fov_width {
        o.fov_width = v;
    }
    if a.coc.is_some() {
        o.circle_of_confusion = a.coc;
    }
    if let Some(v) = a.flash {
        o.flash_duration = v;
    }
    if let Some(v) = a.speed {
        cfg.insect_speed = v;
    }
    let r = design_report(&cfg.optics, cfg.insect_speed).map_err(CliError::config)?;
    let mut text = String::new();
    let _ = writeln!(text, "magnification            {:.4}", r.magnification);
    let _ = writeln!(text, "airy diameter (chip)     {:.3} µm", r.airy_diameter_chip);
    let _ = writeln!(text, "depth of field           {:.2} mm", r.depth_of_field);
    let _ = writeln!(text, "blur (object)            {:.4} mm", r.blur_object);
    let _ = writeln!(text, "blur (chip)              {:.2} µm", r.blur_chip);
    let _ = writeln!(text, "blur (pixels)            {:.2}", r.blur_pixels);
    let _ = writeln!(text, "blur / diffraction       {:.3}", r.blur_to_diffraction_ratio);
    let mut v = serde_json::to_value(r).expect("serializable");
    v["config"] = serde_json::to_value(&cfg.optics).expect("serializable");
    v["insect_speed"] = cfg.insect_speed.into();
    report(v, text)
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Class index of the insect (0..16).
    #[arg(long, default_value_t = 0)]
    pub class: usize,
    #[arg(long, default_value_t = 30)]
    pub frames: usize,
    #[arg(long, default_value_t = 256)]
    pub width: usize,
    #[arg(long, default_value_t = 192)]
    pub height: usize,
}

pub fn simulate(cfg: RunConfig, a: SimulateArgs) -> CliResult<Report> {
    let tree = cfg.load_taxonomy()?;
    let t = synth_transit_with_masks(a.class, cfg.seed, a.frames, a.width, a.height).map_err(CliError::config)?;
    let out = cfg.out_dir("simulate");
    create_dir(&out)?;
    let mut files = Vec::new();
    for (i, f) in t.frames.iter().enumerate() {
        let name = format!("frame_{i:04}.ppm");
        write_ppm(&out.join(&name), f).stage("write")?;
        files.push(name);
        if let Some(m) = &t.masks[i] {
            write_pgm_mask(&out.join(format!("mask_{i:04}.pgm")), m).stage("write")?;
        }
    }
    let luminance: Vec<f64> = t.frames.iter().map(mean_luminance).collect();
    let sidecar = json!({
        "class_id": a.class,
        "species": tree.species_names().get(a.class),
        "seed": cfg.seed,
        "layout": t.layout,
        "timestamps": t.frames.iter().map(|f| f.timestamp).collect::<Vec<_>>(),
        "luminance": luminance,
        "frames": files,
    });
    write_file(&out.join("transit.json"), to_json(&sidecar))?;
    let text = format!(
        "wrote {} frames to {} (lead {}, flash {}, tail {})\n",
        t.frames.len(),
        out.display(),
        t.layout.lead,
        t.layout.flash,
        t.layout.tail
    );
    report(sidecar, text)
}

#[derive(Debug, Args)]
pub struct TriggerArgs {
    /// Luminance series: JSON array, object with a `luminance` array, or one value per line.
    pub input: PathBuf,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long)]
    pub cooldown: Option<usize>,
    #[arg(long)]
    pub followups: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
}

fn parse_series(text: &str) -> Result<Vec<f64>, String> {
    if let Ok(v) = serde_json::from_str::<serde_json::Value>(text) {
        let arr = match &v {
            serde_json::Value::Array(_) => &v,
            serde_json::Value::Object(o) => o.get("luminance").ok_or("JSON object has no `luminance` field")?,
            _ => return Err("expected a JSON array or object".into()),
        };
        return serde_json::from_value(arr.clone()).map_err(|e| e.to_string());
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| l.trim().parse::<f64>().map_err(|e| format!("line {}: {e}", i + 1)))
        .collect()
}

pub fn trigger(mut cfg: RunConfig, a: TriggerArgs) -> CliResult<Report> {
    let t = &mut cfg.trigger;
    if let Some(v) = a.window {
        t.baseline_window = v;
    }
    if let Some(v) = a.ratio {
        t.ratio_threshold = v;
    }
    if let Some(v) = a.cooldown {
        t.cooldown = v;
    }
    if let Some(v) = a.followups {
        t.followup_count = v;
    }
    if let Some(v) = a.stride {
        t.followup_stride = v;
    }
    cfg.trigger.validate().map_err(CliError::config)?;
    let text = std::fs::read_to_string(&a.input).map_err(|e| CliError::Data(format!("{}: {e}", a.input.display())))?;
    let series = parse_series(&text).map_err(|e| CliError::Data(format!("{}: {e}", a.input.display())))?;
    let events = detect_triggers(&series, &cfg.trigger).map_err(CliError::data)?;
    let mut out = String::new();
    for e in &events {
        let _ = writeln!(out, "trigger at {:>5}  frames {:?}", e.trigger_index, e.selected_indices);
    }
    if events.is_empty() {
        out.push_str("no triggers\n");
    }
    report(json!({ "config": cfg.trigger, "events": events }), out)
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Frame (binary PPM).
    pub image: PathBuf,
    /// Insect mask (binary PGM, nonzero = insect).
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Luma threshold used when no mask is given.
    #[arg(long, default_value_t = 100)]
    pub threshold: u8,
    /// Treat pixels at or below the threshold as insect.
    #[arg(long)]
    pub invert: bool,
    #[arg(long)]
    pub min_area: Option<usize>,
    #[arg(long)]
    pub margin: Option<f64>,
    /// Output side in pixels.
    #[arg(long, alias = "size")]
    pub resize: Option<usize>,
    /// 4 or 8.
    #[arg(long)]
    pub connectivity: Option<u8>,
}

pub fn detect(cfg: RunConfig, a: DetectArgs) -> CliResult<Report> {
    let frame = read_ppm(&a.image).map_err(CliError::data)?;
    let mut crop_cfg = cfg.crop.clone().unwrap_or_else(|| CropConfig::for_image(frame.width(), frame.height()));
    if let Some(v) = a.min_area {
        crop_cfg.min_area = v;
    }
    if let Some(v) = a.margin {
        crop_cfg.margin = v;
    }
    if let Some(v) = a.resize {
        crop_cfg.target_size = v;
    }
    if let Some(c) = a.connectivity {
        crop_cfg.connectivity = Connectivity::try_from(c).map_err(CliError::config)?;
    }
    crop_cfg.validate().map_err(CliError::config)?;
    let mask = match &a.mask {
        Some(p) => read_pgm_mask(p).map_err(CliError::data)?,
        None => {
            let m = threshold_mask(&frame, a.threshold);
            if a.invert { m.inverted() } else { m }
        }
    };
    let (bbox, crop) = crop_insect(&frame, &mask, &crop_cfg).stage("detect")?;
    let out = cfg.out_dir("detect");
    create_dir(&out)?;
    let path = out.join("crop.ppm");
    write_ppm(&path, &crop).stage("write")?;
    let text = format!("box x={} y={} w={} h={} -> {}\n", bbox.x, bbox.y, bbox.w, bbox.h, path.display());
    report(json!({ "bbox": bbox, "crop": path, "config": crop_cfg }), text)
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Manifest file (falls back to the config's `manifest`).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

fn manifest_path(cfg: &RunConfig, flag: Option<PathBuf>) -> CliResult<PathBuf> {
    flag.or_else(|| cfg.manifest.clone()).ok_or_else(|| CliError::Config("no manifest given (--manifest or config `manifest`)".into()))
}

fn load_manifest_checked(cfg: &RunConfig, path: &Path, tree: &TaxonomyTree) -> CliResult<DatasetManifest> {
    if !path.exists() {
        return Err(CliError::Config(format!("manifest {} does not exist", path.display())));
    }
    let _ = cfg;
    load_manifest(path, tree).map_err(CliError::data)
}

pub fn split(cfg: RunConfig, a: SplitArgs) -> CliResult<Report> {
    let tree = cfg.load_taxonomy()?;
    let path = manifest_path(&cfg, a.manifest)?;
    let mut manifest = load_manifest_checked(&cfg, &path, &tree)?;
    let assignment = stratified_split(&manifest, cfg.split, cfg.seed).map_err(CliError::data)?;
    for (r, t) in manifest.records.iter_mut().zip(&assignment.tags) {
        r.split = Some(*t);
    }
    let out = cfg.out_dir("split");
    create_dir(&out)?;
    write_file(&out.join("split.tsv"), manifest.to_tsv())?;
    write_file(&out.join("split.json"), to_json(&seeded(&assignment, cfg.seed)))?;
    let mut text = String::from("species                       train  val  test\n");
    for (name, c) in manifest.classes.iter().zip(&assignment.counts) {
        if c.iter().sum::<usize>() > 0 {
            let _ = writeln!(text, "{name:<28} {:>6} {:>4} {:>5}", c[0], c[1], c[2]);
        }
    }
    report(&assignment, text)
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 16)]
    pub classes: usize,
    /// Images per class.
    #[arg(long, default_value_t = 64)]
    pub per_class: usize,
    /// Use the long-tailed class profile instead of `--per-class`.
    #[arg(long)]
    pub long_tail: bool,
    #[arg(long)]
    pub frame_size: Option<usize>,
    #[arg(long)]
    pub image_size: Option<usize>,
}

pub fn synth(cfg: RunConfig, a: SynthArgs) -> CliResult<Report> {
    let tree = cfg.load_taxonomy()?;
    let counts = if a.long_tail { crate::evalkit::LONG_TAIL_PROFILE[..a.classes.min(16)].to_vec() } else { vec![a.per_class; a.classes] };
    if counts.len() > tree.species_count() {
        return Err(CliError::Config(format!("{} classes requested, taxonomy has {}", counts.len(), tree.species_count())));
    }
    let sc = SynthConfig {
        counts,
        frame_size: a.frame_size.unwrap_or(cfg.synth.frame_size),
        image_size: a.image_size.unwrap_or(cfg.synth.image_size),
        seed: cfg.seed,
        ..cfg.synth.clone()
    };
    let data = synth_dataset(&sc).map_err(CliError::config)?;
    let out = cfg.out_dir("synth");
    create_dir(&out.join("full"))?;
    create_dir(&out.join("cropped"))?;
    let names = tree.species_names();
    let mut full = Vec::new();
    let mut cropped = Vec::new();
    for (i, item) in data.items.iter().enumerate() {
        let name = format!("{i:05}.ppm");
        write_ppm(&out.join("full").join(&name), &item.full).stage("write")?;
        write_ppm(&out.join("cropped").join(&name), &item.cropped).stage("write")?;
        let species = names[item.class_id].to_string();
        let rec = |dir: &str| ManifestRecord { image: PathBuf::from(dir).join(&name), species: species.clone(), class_id: item.class_id, mask: None, split: None };
        full.push(rec("full"));
        cropped.push(rec("cropped"));
    }
    write_file(&out.join("full.tsv"), DatasetManifest::from_records(full, &tree).to_tsv())?;
    write_file(&out.join("cropped.tsv"), DatasetManifest::from_records(cropped, &tree).to_tsv())?;
    let hist = class_histogram(&data.labels(), sc.counts.len()).map_err(CliError::data)?;
    let summary = json!({ "config": sc, "images": data.items.len(), "histogram": hist });
    write_file(&out.join("synth.json"), to_json(&summary))?;
    let text = format!(
        "wrote {} images in {} classes to {} (imbalance ratio {})\n",
        data.items.len(),
        sc.counts.len(),
        out.display(),
        hist.imbalance_ratio.map_or("n/a".into(), |r| format!("{r:.2}"))
    );
    report(summary, text)
}

/// Loads the images of `indices`, resized to the network input if needed.
fn load_images(manifest: &DatasetManifest, base: &Path, indices: &[usize], spec: &NetSpec) -> CliResult<LabeledData> {
    let [_, h, w] = spec.input;
    let frames = indices
        .iter()
        .map(|&i| {
            let p = base.join(&manifest.records[i].image);
            let f = read_ppm(&p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            Ok(if (f.width(), f.height()) == (w, h) { f } else { resize_bilinear(&f, w, h) })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let labels = indices.iter().map(|&i| manifest.records[i].class_id).collect();
    LabeledData::new(frames_to_tensor(&frames).map_err(CliError::data)?, labels).map_err(CliError::data)
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// NetSpec JSON (default: the desk reference for the taxonomy's class count).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Weight the loss by inverse class frequency.
    #[arg(long)]
    pub class_weights: bool,
    /// Oversample minority classes in the training split.
    #[arg(long)]
    pub oversample: bool,
}

pub fn train(mut cfg: RunConfig, a: TrainArgs) -> CliResult<Report> {
    if a.spec.is_some() {
        cfg.net_spec = a.spec;
    }
    if let Some(v) = a.epochs {
        cfg.train.epochs = v;
    }
    if let Some(v) = a.learning_rate {
        cfg.train.learning_rate = v;
    }
    if let Some(v) = a.momentum {
        cfg.train.momentum = v;
    }
    if let Some(v) = a.batch_size {
        cfg.train.batch_size = v;
    }
    cfg.train.seed = cfg.seed;
    let path = manifest_path(&cfg, a.manifest)?;
    cfg.validate()?;
    let tree = cfg.load_taxonomy()?;
    let spec = cfg.load_spec(tree.species_count())?;
    let manifest = load_manifest_checked(&cfg, &path, &tree)?;
    let assignment = stratified_split(&manifest, cfg.split, cfg.seed).map_err(CliError::data)?;
    let mut train_idx = assignment.indices(Split::Train);
    let val_idx = assignment.indices(Split::Val);
    if train_idx.is_empty() {
        return Err(CliError::Data("training split is empty".into()));
    }
    let labels = manifest.labels();
    if a.oversample {
        let train_labels: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
        let mut present: Vec<usize> = train_labels.clone();
        present.sort_unstable();
        present.dedup();
        let dense: Vec<usize> = train_labels.iter().map(|l| present.binary_search(l).expect("present")).collect();
        train_idx = oversample(&dense, cfg.seed).map_err(CliError::data)?.into_iter().map(|j| train_idx[j]).collect();
    }
    if a.class_weights {
        let counts = class_histogram(&train_idx.iter().map(|&i| labels[i]).collect::<Vec<_>>(), spec.classes).map_err(CliError::data)?.counts;
        let present: Vec<usize> = counts.iter().copied().filter(|&c| c > 0).collect();
        let w = class_weights(&present).map_err(CliError::data)?;
        let mut it = w.into_iter();
        cfg.train.class_weights = Some(counts.iter().map(|&c| if c > 0 { it.next().expect("one weight per class") } else { 1.0 }).collect());
    }
    let base = base_dir(&path);
    let data = load_images(&manifest, &base, &train_idx, &spec)?;
    let val = if val_idx.is_empty() { None } else { Some(load_images(&manifest, &base, &val_idx, &spec)?) };
    let (params, history) = train_net(&spec, &data, val.as_ref(), &cfg.train).stage("train")?;

    let out = cfg.out_dir("train");
    create_dir(&out)?;
    save_params(&params, out.join("params.bin")).stage("write")?;
    write_file(&out.join("spec.json"), to_json(&spec))?;
    write_file(&out.join("split.json"), to_json(&seeded(&assignment, cfg.seed)))?;
    let summary = json!({ "seed": cfg.seed, "train": cfg.train, "history": history, "params": out.join("params.bin") });
    write_file(&out.join("train_metrics.json"), to_json(&summary))?;
    let mut text = String::from("epoch  loss      train_acc  val_acc\n");
    for m in &history {
        let _ = writeln!(text, "{:>5}  {:<8.4}  {:<9.3}  {}", m.epoch, m.train_loss, m.train_accuracy, m.val_accuracy.map_or("-".into(), |v| format!("{v:.3}")));
    }
    report(summary, text)
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Image to classify (binary PPM; resized to the net input if needed).
    pub image: PathBuf,
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Decision threshold τ.
    #[arg(long)]
    pub threshold: Option<f64>,
}

pub fn predict(mut cfg: RunConfig, a: PredictArgs) -> CliResult<Report> {
    if a.spec.is_some() {
        cfg.net_spec = a.spec;
    }
    if let Some(t) = a.threshold {
        cfg.decision_threshold = t;
    }
    cfg.params = Some(a.params.clone());
    cfg.validate()?;
    let tree = cfg.load_taxonomy()?;
    let spec = cfg.load_spec(tree.species_count())?;
    let params = load_params(&a.params, &spec).map_err(CliError::config)?;
    let frame = read_ppm(&a.image).map_err(CliError::data)?;
    let [_, h, w] = spec.input;
    let frame = if (frame.width(), frame.height()) == (w, h) { frame } else { resize_bilinear(&frame, w, h) };
    let input = frames_to_tensor(std::slice::from_ref(&frame)).map_err(CliError::data)?;
    let probs = crate::nnet::predict(&spec, &params, &input).stage("predict")?;
    decision_report(&tree, probs, cfg.decision_threshold)
}

fn decision_report(tree: &TaxonomyTree, probs: ProbVector, threshold: f64) -> CliResult<Report> {
    let rolled = taxo_rollup(&probs, tree).map_err(CliError::data)?;
    let decision = decide(&rolled, threshold);
    let names = tree.species_names();
    let mut ranked: Vec<(usize, f64)> = probs.values().iter().copied().enumerate().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut text = String::new();
    for &(i, p) in ranked.iter().take(5) {
        let _ = writeln!(text, "{:<28} {p:.4}", names[i]);
    }
    let _ = writeln!(
        text,
        "decision: {} {} ({:.3}){}",
        decision.rank,
        decision.taxon,
        decision.confidence,
        if decision.below_threshold { " below threshold" } else { "" }
    );
    report(json!({ "probabilities": probs, "species": names, "rollup": rolled, "decision": decision, "threshold": threshold }), text)
}

#[derive(Debug, Args)]
pub struct RollupArgs {
    /// JSON array of species probabilities in taxonomy order.
    pub probs: PathBuf,
    #[arg(long)]
    pub threshold: Option<f64>,
}

pub fn rollup(mut cfg: RunConfig, a: RollupArgs) -> CliResult<Report> {
    if let Some(t) = a.threshold {
        cfg.decision_threshold = t;
    }
    cfg.validate()?;
    let tree = cfg.load_taxonomy()?;
    let text = std::fs::read_to_string(&a.probs).map_err(|e| CliError::Data(format!("{}: {e}", a.probs.display())))?;
    let probs: ProbVector = serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", a.probs.display())))?;
    decision_report(&tree, probs, cfg.decision_threshold)
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// train, val, test or all.
    #[arg(long, default_value = "test")]
    pub split: String,
}

pub fn eval(mut cfg: RunConfig, a: EvalArgs) -> CliResult<Report> {
    if a.spec.is_some() {
        cfg.net_spec = a.spec;
    }
    cfg.params = Some(a.params.clone());
    let path = manifest_path(&cfg, a.manifest)?;
    cfg.validate()?;
    let tree = cfg.load_taxonomy()?;
    let spec = cfg.load_spec(tree.species_count())?;
    let params = load_params(&a.params, &spec).map_err(CliError::config)?;
    let manifest = load_manifest_checked(&cfg, &path, &tree)?;
    let idx: Vec<usize> = if a.split == "all" {
        (0..manifest.records.len()).collect()
    } else {
        let which: Split = a.split.parse().map_err(CliError::Config)?;
        stratified_split(&manifest, cfg.split, cfg.seed).map_err(CliError::data)?.indices(which)
    };
    if idx.is_empty() {
        return Err(CliError::Data(format!("split {} is empty", a.split)));
    }
    let data = load_images(&manifest, &base_dir(&path), &idx, &spec)?;
    let preds = predict_classes(&spec, &params, &data.inputs).stage("evaluate")?;
    let metrics = RunMetrics::new(&preds, &data.labels, &manifest.classes).stage("evaluate")?;
    let out = cfg.out_dir("eval");
    create_dir(&out)?;
    write_file(&out.join("metrics.json"), to_json(&seeded(&metrics, cfg.seed)))?;
    write_file(&out.join("confusion.csv"), metrics.confusion.to_csv(&manifest.classes))?;
    write_file(&out.join("confusion.ppm"), crate::detect::encode_ppm(&metrics.confusion.heatmap(8)).stage("write")?)?;
    report(&metrics, metrics_text(&metrics))
}

fn metrics_text(m: &RunMetrics) -> String {
    let mut text = format!("top-1 {:.4} over {} samples\n", m.top1, m.samples);
    text.push_str("species                       support  recall  precision\n");
    for c in m.per_class.iter().filter(|c| c.support > 0 || c.predicted > 0) {
        let flag = if c.never_predicted { "  never predicted" } else { "" };
        let _ = writeln!(text, "{:<28} {:>8}  {:>6.3}  {:>9.3}{flag}", c.name, c.support, c.recall, c.precision);
    }
    text
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Baseline metrics JSON.
    pub a: PathBuf,
    /// Candidate metrics JSON.
    pub b: PathBuf,
}

fn read_metrics(p: &Path) -> CliResult<RunMetrics> {
    let text = std::fs::read_to_string(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
    // Pipeline metrics nest the species metrics.
    let inner = v.get("species").filter(|s| s.is_object()).cloned().unwrap_or(v);
    serde_json::from_value(inner).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
}

pub fn compare(_cfg: RunConfig, a: CompareArgs) -> CliResult<Report> {
    let (x, y) = (read_metrics(&a.a)?, read_metrics(&a.b)?);
    let d = compare_runs(&x, &y).map_err(CliError::data)?;
    let mut text = format!("top-1 {:.4} -> {:.4} ({:+.4})\n", d.top1_a, d.top1_b, d.top1_delta);
    for c in &d.per_class {
        let _ = writeln!(text, "{:<28} {:.3} -> {:.3} ({:+.3})", c.name, c.recall_a, c.recall_b, c.delta);
    }
    if let Some(w) = &d.worst_regression {
        let _ = writeln!(text, "worst regression: {} ({:+.3})", w.name, w.delta);
    }
    report(&d, text)
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Re-run the configuration stored in this run record.
    #[arg(long)]
    pub replay: Option<PathBuf>,
    #[arg(long)]
    pub transits: Option<usize>,
    /// Pre-trained parameter file; otherwise a classifier is trained on synthetic crops.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Use a luma threshold instead of segmentation masks.
    #[arg(long)]
    pub threshold_masks: Option<u8>,
}

pub fn pipeline(mut cfg: RunConfig, a: PipelineArgs) -> CliResult<Report> {
    let record = match a.replay {
        Some(path) => pipeline::replay(&path, cfg.out.clone())?,
        None => {
            if let Some(v) = a.transits {
                cfg.pipeline.transits = v;
            }
            if a.params.is_some() {
                cfg.params = a.params;
            }
            if a.spec.is_some() {
                cfg.net_spec = a.spec;
            }
            if let Some(v) = a.epochs {
                cfg.train.epochs = v;
            }
            if let Some(t) = a.threshold_masks {
                cfg.pipeline.masks = MaskSource::Threshold { threshold: t, invert: true };
            }
            pipeline::run_pipeline(&cfg)?
        }
    };
    let m = &record.metrics;
    let out = record.config.out.clone().unwrap_or_default();
    let mut text = format!(
        "run {}: {} transits, {} captures, {} crops -> {}\n",
        record.run_id,
        m.transits,
        m.captures,
        m.crops,
        out.display()
    );
    text.push_str(&metrics_text(&m.species));
    let _ = writeln!(text, "decisions by rank: {:?}; lineage-consistent {}/{}", m.decisions_by_rank, m.consistent_decisions, m.crops);
    report(seeded(&record, record.config.seed), text)
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub per_class: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

pub fn experiment(mut cfg: RunConfig, a: ExperimentArgs) -> CliResult<Report> {
    if let Some(v) = a.per_class {
        cfg.experiment.images_per_class = v;
    }
    if let Some(v) = a.epochs {
        cfg.train.epochs = v;
    }
    let out = cfg.out_dir("experiment");
    let r = experiment::experiment_full_vs_cropped(&cfg, Some(&out))?;
    let text = format!(
        "full    top-1 {:.4}\ncropped top-1 {:.4}\ndelta         {:+.4}\nreports in {}\n",
        r.full.test.top1,
        r.cropped.test.top1,
        r.delta.top1_delta,
        out.display()
    );
    report(json!({ "seed": r.seed, "full": r.full.test.top1, "cropped": r.cropped.test.top1, "delta": r.delta, "out": out }), text)
}
