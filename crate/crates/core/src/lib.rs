//! Image pipeline for automated insect monitoring on edge hardware.
//!
//! The stages, in the order a capture flows through them:
//!
//! 1. [`optics`] – imaging design arithmetic (magnification, diffraction, depth of
//!    field, flash motion blur).
//! 2. [`imaging`] – ring-buffered frame stream, brightness-spike trigger and
//!    three-frame extraction, plus a synthetic transit generator.
//! 3. [`detect`] – mask thresholding, connected components with dust filtering,
//!    square crops, bilinear resize and IoU metrics.
//! 4. [`nnet`] – a small from-scratch CNN engine (forward, backward, SGD, gradient check).
//! 5. [`taxonomy`] – order→family→genus→species tree, probability rollup and the
//!    "deepest confident rank" decision rule.
//! 6. [`evalkit`] – manifests, stratified splits, class weights, oversampling,
//!    confusion matrices and the synthetic insect dataset.
//! 7. [`cli`] – the `insect-vision` command line and reproducible pipeline runs.

pub mod cli;
pub mod detect;
pub mod evalkit;
pub mod imaging;
pub mod nnet;
pub mod optics;
pub mod rng;
pub mod taxonomy;

pub use detect::{BBox, CropConfig, Mask};
pub use imaging::{CaptureEvent, Frame, FrameRing, TriggerConfig};
pub use nnet::{NetSpec, ParamSet, Tensor, TrainConfig};
pub use optics::{OpticalConfig, OpticsReport};
pub use taxonomy::{Decision, ProbVector, Rank, TaxonomyTree};
