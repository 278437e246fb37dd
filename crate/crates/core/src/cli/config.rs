use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::error::{CliError, CliResult};
use crate::detect::CropConfig;
use crate::evalkit::{SplitRatios, SynthConfig};
use crate::imaging::{TriggerConfig, DEFAULT_FPS, DEFAULT_RING_SECONDS};
use crate::nnet::{NetSpec, TrainConfig};
use crate::optics::{OpticalConfig, DEFAULT_INSECT_SPEED_MPS};
use crate::taxonomy::{parse_taxonomy, TaxonomyTree, DEFAULT_DECISION_THRESHOLD};

/// Where the pipeline gets insect masks from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MaskSource {
    /// Generator ground truth with boundary noise and dust, standing in for a
    /// segmentation model.
    Segmentation { dust: usize },
    /// Global luma threshold; `invert` selects pixels at or below it.
    Threshold { threshold: u8, invert: bool },
}

impl Default for MaskSource {
    fn default() -> Self {
        MaskSource::Segmentation { dust: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Simulated insect passages.
    pub transits: usize,
    pub frames_per_transit: usize,
    pub width: usize,
    pub height: usize,
    /// Images per class for the classifier trained when no parameter file is given.
    pub train_per_class: usize,
    pub masks: MaskSource,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self { transits: 4, frames_per_transit: 30, width: 256, height: 192, train_per_class: 32, masks: MaskSource::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub images_per_class: usize,
    pub frame_size: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self { images_per_class: 64, frame_size: 256 }
    }
}

/// Every tunable of a run. Loaded from JSON, overridden by flags and echoed into
/// the run record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub optics: OpticalConfig,
    pub insect_speed: f64,
    pub fps: f64,
    pub ring_seconds: f64,
    pub trigger: TriggerConfig,
    /// `None` scales the default dust threshold to the frame size.
    pub crop: Option<CropConfig>,
    pub net_spec: Option<PathBuf>,
    pub params: Option<PathBuf>,
    pub train: TrainConfig,
    pub taxonomy: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub split: SplitRatios,
    pub decision_threshold: f64,
    pub synth: SynthConfig,
    pub pipeline: PipelineConfig,
    pub experiment: ExperimentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: None,
            optics: OpticalConfig::default(),
            insect_speed: DEFAULT_INSECT_SPEED_MPS,
            fps: DEFAULT_FPS,
            ring_seconds: DEFAULT_RING_SECONDS,
            trigger: TriggerConfig::default(),
            crop: None,
            net_spec: None,
            params: None,
            train: TrainConfig::default(),
            taxonomy: None,
            manifest: None,
            split: SplitRatios::default(),
            decision_threshold: DEFAULT_DECISION_THRESHOLD,
            synth: SynthConfig::default(),
            pipeline: PipelineConfig::default(),
            experiment: ExperimentConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Checks that every referenced path exists and the numeric blocks are valid.
    pub fn validate(&self) -> CliResult<()> {
        for (name, p) in [("taxonomy", &self.taxonomy), ("net_spec", &self.net_spec), ("params", &self.params), ("manifest", &self.manifest)] {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(CliError::Config(format!("{name} path {} does not exist", p.display())));
                }
            }
        }
        self.optics.validate().map_err(CliError::config)?;
        self.trigger.validate().map_err(CliError::config)?;
        self.train.validate().map_err(CliError::config)?;
        if let Some(c) = &self.crop {
            c.validate().map_err(CliError::config)?;
        }
        if !(0.0..=1.0).contains(&self.decision_threshold) {
            return Err(CliError::Config(format!("decision_threshold {} not in [0, 1]", self.decision_threshold)));
        }
        if !(self.fps > 0.0 && self.ring_seconds > 0.0) {
            return Err(CliError::Config("fps and ring_seconds must be positive".into()));
        }
        Ok(())
    }

    pub fn out_dir(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }

    pub fn load_taxonomy(&self) -> CliResult<TaxonomyTree> {
        match &self.taxonomy {
            None => Ok(TaxonomyTree::table1()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("taxonomy {}: {e}", p.display())))?;
                parse_taxonomy(&text).map_err(|e| CliError::Data(format!("taxonomy {}: {e}", p.display())))
            }
        }
    }

    /// The configured spec, or the desk reference for `classes`.
    pub fn load_spec(&self, classes: usize) -> CliResult<NetSpec> {
        let spec = match &self.net_spec {
            None => NetSpec::desk_reference(classes),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("net spec {}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("net spec {}: {e}", p.display())))?
            }
        };
        spec.param_shapes().map_err(CliError::config)?;
        if spec.classes != classes {
            return Err(CliError::Config(format!("net spec has {} classes, taxonomy has {classes}", spec.classes)));
        }
        Ok(spec)
    }
}
