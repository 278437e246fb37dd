//! Insect localization: threshold baseline, connected components with dust filtering,
//! square crops, bilinear resize and overlap metrics.

mod components;
mod geometry;
mod pnm;
mod resample;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{luma_milli, Frame};

pub use components::{connected_components, mask_to_bbox, Component, Connectivity};
pub use geometry::{bbox_iou, mask_iou, square_expand, BBox};
pub use pnm::{decode_pgm_mask, decode_ppm, encode_pgm_mask, encode_ppm, read_pgm_mask, read_ppm, write_pgm_mask, write_ppm, PnmError};
pub use resample::{crop, resize_bilinear};

#[derive(Debug, Error, PartialEq)]
pub enum DetectError {
    #[error("mask buffer holds {actual} values, expected {expected}")]
    BufferSize { expected: usize, actual: usize },
    #[error("masks differ in size: {a_w}x{a_h} vs {b_w}x{b_h}")]
    DimensionMismatch { a_w: usize, a_h: usize, b_w: usize, b_h: usize },
    #[error("no insect: no component of at least {min_area} px")]
    NoInsect { min_area: usize },
    #[error("box {bbox:?} exceeds the {width}x{height} image")]
    OutOfBounds { bbox: BBox, width: usize, height: usize },
    #[error("invalid crop config: {0}")]
    InvalidConfig(String),
}

/// Row-major binary mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self, DetectError> {
        if bits.len() != width * height {
            return Err(DetectError::BufferSize { expected: width * height, actual: bits.len() });
        }
        Ok(Self { width, height, bits })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![false; width * height] }
    }

    /// Builds a mask with the listed `(x, y)` cells set.
    pub fn from_points(width: usize, height: usize, points: &[(usize, usize)]) -> Self {
        let mut m = Self::empty(width, height);
        for &(x, y) in points {
            m.set(x, y, true);
        }
        m
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn inverted(&self) -> Self {
        Self { width: self.width, height: self.height, bits: self.bits.iter().map(|b| !b).collect() }
    }
}

/// Global luma threshold: a bit is set iff the pixel's Rec.601 luma exceeds `threshold`.
///
/// This is the classical baseline; a single global value cannot cope with varying
/// exposure, multiple differently colored insects or transparent wings, which is why
/// externally predicted masks are the primary input of [`mask_to_bbox`].
pub fn threshold_mask(frame: &Frame, threshold: u8) -> Mask {
    let limit = u32::from(threshold) * 1000;
    let bits = frame
        .pixels()
        .chunks_exact(3)
        .map(|p| luma_milli([p[0], p[1], p[2]]) > limit)
        .collect();
    Mask { width: frame.width(), height: frame.height(), bits }
}

/// Localization and cropping parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CropConfig {
    pub connectivity: Connectivity,
    /// Components smaller than this are treated as dust.
    pub min_area: usize,
    /// Fraction of the box side added on each side before squaring.
    pub margin: f64,
    /// Side of the square classifier input.
    pub target_size: usize,
}

/// Dust threshold at the native 1440×1080 capture resolution.
pub const NATIVE_MIN_AREA: usize = 50;
pub const NATIVE_WIDTH: usize = 1440;
pub const NATIVE_HEIGHT: usize = 1080;

impl Default for CropConfig {
    fn default() -> Self {
        Self { connectivity: Connectivity::Eight, min_area: NATIVE_MIN_AREA, margin: 0.05, target_size: 224 }
    }
}

impl CropConfig {
    /// Default config with the dust threshold scaled by image area.
    pub fn for_image(width: usize, height: usize) -> Self {
        let scaled = NATIVE_MIN_AREA as f64 * (width * height) as f64 / (NATIVE_WIDTH * NATIVE_HEIGHT) as f64;
        Self { min_area: (scaled.round() as usize).max(1), ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), DetectError> {
        if self.min_area < 1 {
            return Err(DetectError::InvalidConfig("min_area must be >= 1".into()));
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return Err(DetectError::InvalidConfig(format!("margin must be >= 0, got {}", self.margin)));
        }
        if self.target_size < 1 {
            return Err(DetectError::InvalidConfig("target_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Mask → dust-filtered box → square → crop → resize to `target_size`.
pub fn crop_insect(frame: &Frame, mask: &Mask, cfg: &CropConfig) -> Result<(BBox, Frame), DetectError> {
    cfg.validate()?;
    if mask.width() != frame.width() || mask.height() != frame.height() {
        return Err(DetectError::DimensionMismatch {
            a_w: frame.width(),
            a_h: frame.height(),
            b_w: mask.width(),
            b_h: mask.height(),
        });
    }
    let tight = mask_to_bbox(mask, cfg)?;
    let square = square_expand(tight, cfg.margin, frame.width(), frame.height());
    let patch = crop(frame, square)?;
    Ok((square, resize_bilinear(&patch, cfg.target_size, cfg.target_size)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_examples() {
        let black = Frame::filled(4, 4, [0, 0, 0], 0.0).unwrap();
        assert_eq!(threshold_mask(&black, 10).count(), 0);

        let mut one = Frame::filled(4, 4, [0, 0, 0], 0.0).unwrap();
        one.set_pixel(2, 1, [255, 255, 255]);
        let m = threshold_mask(&one, 128);
        assert_eq!(m.count(), 1);
        assert!(m.get(2, 1));

        let row: Vec<u8> = (0..=255u8).flat_map(|v| [v, v, v]).collect();
        let gradient = Frame::new(256, 1, row, 0.0).unwrap();
        let m = threshold_mask(&gradient, 127);
        for x in 0..256 {
            assert_eq!(m.get(x, 0), x >= 128, "x = {x}");
        }
    }

    #[test]
    fn scaled_min_area() {
        assert_eq!(CropConfig::for_image(1440, 1080).min_area, 50);
        assert_eq!(CropConfig::for_image(720, 540).min_area, 13);
        assert_eq!(CropConfig::for_image(16, 16).min_area, 1);
    }

    #[test]
    fn crop_insect_end_to_end() {
        let mut frame = Frame::filled(40, 30, [150, 150, 150], 1.5).unwrap();
        let mut mask = Mask::empty(40, 30);
        for y in 10..16 {
            for x in 20..24 {
                frame.set_pixel(x, y, [20, 20, 20]);
                mask.set(x, y, true);
            }
        }
        mask.set(1, 1, true);
        let cfg = CropConfig { min_area: 3, margin: 0.0, target_size: 12, ..Default::default() };
        let (b, out) = crop_insect(&frame, &mask, &cfg).unwrap();
        assert_eq!(b, BBox::new(19, 10, 6, 6));
        assert_eq!((out.width(), out.height()), (12, 12));
        assert_eq!(out.timestamp, 1.5);
        let bad = Mask::empty(10, 10);
        assert!(crop_insect(&frame, &bad, &cfg).is_err());
    }
}
