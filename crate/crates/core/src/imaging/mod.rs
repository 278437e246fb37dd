//! Capture-unit simulation: frames, the ring buffer holding the most recent video,
//! the brightness-spike trigger and frame extraction.

mod capture;
mod ring;
mod transit;
mod trigger;

use thiserror::Error;

pub use capture::{spawn_capture, CaptureUnit, Capture};
pub use ring::{ring_capacity, FrameRing, DEFAULT_FPS, DEFAULT_RING_SECONDS};
pub use transit::{synth_ambient, synth_transit, synth_transit_with_masks, Transit, TransitLayout};
pub use trigger::{detect_triggers, CaptureEvent, TriggerConfig};

#[derive(Debug, Error, PartialEq)]
pub enum ImagingError {
    #[error("frame buffer holds {actual} bytes, expected {expected} for {width}x{height} RGB")]
    BufferSize { width: usize, height: usize, expected: usize, actual: usize },
    #[error("frame dimensions must be at least 1x1, got {width}x{height}")]
    EmptyFrame { width: usize, height: usize },
    #[error("frame is {got_w}x{got_h}, ring expects {want_w}x{want_h}")]
    DimensionMismatch { want_w: usize, want_h: usize, got_w: usize, got_h: usize },
    #[error("{name} must be strictly positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("luminance series has {len} values, need at least {needed} (baseline window + 1)")]
    SeriesTooShort { len: usize, needed: usize },
    #[error("invalid trigger config: {0}")]
    InvalidTrigger(String),
    #[error("class id {class_id} out of range (0..{classes})")]
    InvalidClass { class_id: usize, classes: usize },
    #[error("transit needs at least 3 frames, got {0}")]
    TooFewFrames(usize),
}

/// Row-major 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
    /// Seconds since stream start.
    pub timestamp: f64,
}

impl Frame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>, timestamp: f64) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::EmptyFrame { width, height });
        }
        let expected = width * height * 3;
        if pixels.len() != expected {
            return Err(ImagingError::BufferSize { width, height, expected, actual: pixels.len() });
        }
        Ok(Self { width, height, pixels, timestamp })
    }

    /// A frame filled with one color.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3], timestamp: f64) -> Result<Self, ImagingError> {
        let pixels = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self::new(width, height, pixels, timestamp)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }
}

/// Rec.601 luma scaled by 1000, exact in integers.
#[inline]
pub fn luma_milli(rgb: [u8; 3]) -> u32 {
    299 * u32::from(rgb[0]) + 587 * u32::from(rgb[1]) + 114 * u32::from(rgb[2])
}

/// Mean Rec.601 luma (0.299 R + 0.587 G + 0.114 B) over the frame, in `[0, 255]`.
pub fn mean_luminance(frame: &Frame) -> f64 {
    let total: u64 = frame
        .pixels
        .chunks_exact(3)
        .map(|p| u64::from(luma_milli([p[0], p[1], p[2]])))
        .sum();
    total as f64 / 1000.0 / (frame.width * frame.height) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_invariants() {
        assert!(Frame::new(2, 2, vec![0; 12], 0.0).is_ok());
        assert!(matches!(Frame::new(2, 2, vec![0; 11], 0.0), Err(ImagingError::BufferSize { .. })));
        assert!(matches!(Frame::new(0, 2, vec![], 0.0), Err(ImagingError::EmptyFrame { .. })));
    }

    #[test]
    fn luminance_examples() {
        let black = Frame::filled(4, 3, [0, 0, 0], 0.0).unwrap();
        assert_eq!(mean_luminance(&black), 0.0);
        let white = Frame::filled(4, 3, [255, 255, 255], 0.0).unwrap();
        assert_eq!(mean_luminance(&white), 255.0);
        let two = Frame::new(2, 1, vec![255, 0, 0, 0, 0, 0], 0.0).unwrap();
        assert!((mean_luminance(&two) - 38.1225).abs() < 1e-12);
    }
}
