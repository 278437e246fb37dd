//! Small convolutional networks from scratch.
//!
//! A [`NetSpec`] declares the architecture, [`init_params`] draws He-normal weights,
//! [`train`] runs momentum SGD, [`predict`] returns class probabilities and
//! [`grad_check`] compares the analytic gradients with central differences.

mod engine;
mod gradcheck;
mod io;
mod spec;
mod tensor;
mod train;

use thiserror::Error;

pub use engine::{conv2d_direct, forward, init_params, loss_and_grads, predict, softmax, Gradients, LayerParams, ParamSet};
pub use gradcheck::{grad_check, grad_check_with, GradCheckReport};
pub use io::{decode_params, encode_params, load_params, save_params, PARAMS_MAGIC, PARAMS_VERSION};
pub use spec::{param_count, Layer, NetSpec};
pub use tensor::{frames_to_tensor, Tensor};
pub use train::{accuracy, predict_classes, train, EpochMetrics, LabeledData, TrainConfig};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid network spec: {0}")]
    Spec(String),
    #[error("tensor shape {shape:?} does not match data length {len}")]
    TensorSize { shape: Vec<usize>, len: usize },
    #[error("tensor contains a non-finite value")]
    NonFinite,
    #[error("no data")]
    EmptyData,
    #[error("input shape {got:?} does not match expected {expected:?}")]
    InputShape { expected: Vec<usize>, got: Vec<usize> },
    #[error("parameter shape mismatch: {0}")]
    ParamShape(String),
    #[error("{labels} labels for {samples} samples")]
    LabelCount { labels: usize, samples: usize },
    #[error("label {label} out of range for {classes} classes")]
    InvalidLabel { label: usize, classes: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("not a parameter file (bad magic)")]
    BadMagic,
    #[error("unsupported parameter file version {0}")]
    UnsupportedVersion(u32),
    #[error("parameter file truncated")]
    Truncated,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
