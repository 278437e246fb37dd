//! Datasets and evaluation: manifests, stratified splits, imbalance utilities,
//! confusion-matrix metrics, run comparison and the synthetic insect generator.

mod imbalance;
mod manifest;
mod metrics;
mod split;
pub mod synth;

use thiserror::Error;

pub use imbalance::{class_histogram, class_weights, oversample, ClassHistogram};
pub use manifest::{load_manifest, parse_manifest, DatasetManifest, ManifestRecord};
pub use metrics::{compare_runs, confusion_matrix, top1_accuracy, ClassDelta, ClassMetrics, ConfusionMatrix, DeltaReport, RunMetrics};
pub use split::{stratified_split, stratified_split_labels, Split, SplitAssignment, SplitRatios};
pub use synth::{synth_dataset, synth_scene, SynthConfig, SynthDataset, SynthItem, LONG_TAIL_PROFILE};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("class id {class_id} out of range (0..{classes})")]
    InvalidClass { class_id: usize, classes: usize },
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("class {0} has no records")]
    EmptyClass(usize),
    #[error("class {0} has a zero count")]
    ZeroCount(usize),
    #[error("{predictions} predictions for {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("no samples")]
    Empty,
    #[error("index {index} out of range for {classes} classes")]
    IndexOutOfRange { index: usize, classes: usize },
    #[error("runs cover different class sets")]
    ClassMismatch,
    #[error("invalid split ratios: {0}")]
    Ratios(String),
    #[error("some records carry a split tag and others do not")]
    MixedSplitTags,
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}
