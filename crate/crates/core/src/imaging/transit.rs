use rand::Rng as _;

use super::ring::DEFAULT_FPS;
use super::{Frame, ImagingError};
use crate::detect::Mask;
use crate::evalkit::synth::{add_noise, appearance, gray_background, render_insect, Pose, MAX_CLASSES, RELATIVE_HALF_LENGTH};
use crate::rng::{self, Rng};

/// Frame counts of the three phases of a transit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct TransitLayout {
    pub lead: usize,
    pub flash: usize,
    pub tail: usize,
}

impl TransitLayout {
    /// Dark lead-in long enough to fill the default baseline window when `n ≥ 10`,
    /// about a third of the frames lit, the rest dark.
    pub fn for_length(n: usize) -> Self {
        let lead = (n / 3).max(8.min(n.saturating_sub(2)));
        let flash = (n / 3).max(1).min(n - lead);
        Self { lead, flash, tail: n - lead - flash }
    }

    pub fn flash_range(&self) -> std::ops::Range<usize> {
        self.lead..self.lead + self.flash
    }
}

/// A simulated insect passage with its ground-truth masks.
#[derive(Debug, Clone, PartialEq)]
pub struct Transit {
    pub class_id: usize,
    pub layout: TransitLayout,
    pub frames: Vec<Frame>,
    /// Insect mask of every flash frame, `None` for dark frames.
    pub masks: Vec<Option<Mask>>,
}

fn dark_frame(width: usize, height: usize, level: i16, r: &mut Rng, t: f64) -> Frame {
    let flicker: i16 = r.random_range(-1..=1);
    let v = (level + flicker).clamp(0, 255) as u8;
    let mut f = Frame::filled(width, height, [v; 3], t).expect("positive dimensions");
    add_noise(&mut f, 3, r);
    f
}

fn check(n: usize, width: usize, height: usize) -> Result<(), ImagingError> {
    if n < 3 {
        return Err(ImagingError::TooFewFrames(n));
    }
    if width < 16 || height < 16 {
        return Err(ImagingError::EmptyFrame { width, height });
    }
    Ok(())
}

/// Dark frames, then flash frames with the insect crossing the field of view, then dark frames.
pub fn synth_transit_with_masks(class_id: usize, seed: u64, n: usize, width: usize, height: usize) -> Result<Transit, ImagingError> {
    check(n, width, height)?;
    let app = appearance(class_id).map_err(|_| ImagingError::InvalidClass { class_id, classes: MAX_CLASSES })?;
    let layout = TransitLayout::for_length(n);
    let mut r = rng::sub_rng(seed, "transit", class_id as u64);
    let ambient: i16 = r.random_range(4..=16);
    let half_length = RELATIVE_HALF_LENGTH * width.min(height) as f64 * r.random_range(0.9..1.1);
    let margin = (1.6 * half_length).ceil() + 1.0;
    let angle = r.random_range(-15f64..15.0).to_radians();
    let cy = r.random_range(margin..(height as f64 - margin).max(margin + 1e-9));
    let (x_start, x_end) = ((0.25 * width as f64).max(margin), (0.75 * width as f64).min(width as f64 - margin));
    let background = gray_background(width, height, &mut r, 0.0);

    let mut frames = Vec::with_capacity(n);
    let mut masks = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / DEFAULT_FPS;
        if layout.flash_range().contains(&i) {
            let k = i - layout.lead;
            let f = if layout.flash > 1 { k as f64 / (layout.flash - 1) as f64 } else { 0.5 };
            let pose = Pose { cx: x_start + f * (x_end - x_start), cy, angle, half_length };
            let mut frame = background.clone();
            frame.timestamp = t;
            let mut mask = Mask::empty(width, height);
            render_insect(&mut frame, &mut mask, &app, &pose);
            add_noise(&mut frame, 6, &mut r);
            frames.push(frame);
            masks.push(Some(mask));
        } else {
            frames.push(dark_frame(width, height, ambient, &mut r, t));
            masks.push(None);
        }
    }
    Ok(Transit { class_id, layout, frames, masks })
}

pub fn synth_transit(class_id: usize, seed: u64, n: usize, width: usize, height: usize) -> Result<Vec<Frame>, ImagingError> {
    Ok(synth_transit_with_masks(class_id, seed, n, width, height)?.frames)
}

/// Dark frames only: ambient level in `[4, 16]`, ±1 flicker and ±3 pixel noise.
pub fn synth_ambient(seed: u64, n: usize, width: usize, height: usize) -> Result<Vec<Frame>, ImagingError> {
    check(n, width, height)?;
    let mut r = rng::sub_rng(seed, "ambient", 0);
    let ambient: i16 = r.random_range(4..=16);
    Ok((0..n).map(|i| dark_frame(width, height, ambient, &mut r, i as f64 / DEFAULT_FPS)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::{connected_components, threshold_mask, Connectivity, CropConfig};
    use crate::imaging::{detect_triggers, mean_luminance, TriggerConfig};

    fn luma(frames: &[Frame]) -> Vec<f64> {
        frames.iter().map(mean_luminance).collect()
    }

    #[test]
    fn layouts() {
        assert_eq!(TransitLayout::for_length(3), TransitLayout { lead: 1, flash: 1, tail: 1 });
        assert_eq!(TransitLayout::for_length(10), TransitLayout { lead: 8, flash: 2, tail: 0 });
        assert_eq!(TransitLayout::for_length(30), TransitLayout { lead: 10, flash: 10, tail: 10 });
        for n in 3..200 {
            let l = TransitLayout::for_length(n);
            assert_eq!(l.lead + l.flash + l.tail, n);
            assert!(l.flash >= 1);
        }
    }

    #[test]
    fn deterministic() {
        let a = synth_transit(3, 7, 12, 64, 48).unwrap();
        assert_eq!(a, synth_transit(3, 7, 12, 64, 48).unwrap());
        assert_ne!(a, synth_transit(3, 8, 12, 64, 48).unwrap());
    }

    #[test]
    fn fires_exactly_once() {
        for seed in 0..10 {
            for n in [10, 24, 60] {
                let frames = synth_transit(seed as usize % 16, seed, n, 64, 48).unwrap();
                let ev = detect_triggers(&luma(&frames), &TriggerConfig::default()).unwrap();
                assert_eq!(ev.len(), 1, "seed {seed} n {n}");
                assert_eq!(ev[0].trigger_index, TransitLayout::for_length(n).lead);
            }
        }
    }

    #[test]
    fn flash_frames_hold_a_large_bright_region() {
        let t = synth_transit_with_masks(2, 1, 30, 128, 96).unwrap();
        let min_area = CropConfig::for_image(128, 96).min_area;
        for i in t.layout.flash_range() {
            let comps = connected_components(&threshold_mask(&t.frames[i], 60), Connectivity::Eight);
            assert!(comps.first().is_some_and(|c| c.area >= min_area));
            assert!(t.masks[i].as_ref().unwrap().count() >= min_area);
        }
    }

    #[test]
    fn ambient_never_fires() {
        for seed in 0..10 {
            let frames = synth_ambient(seed, 40, 32, 32).unwrap();
            assert!(detect_triggers(&luma(&frames), &TriggerConfig::default()).unwrap().is_empty());
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(synth_transit(16, 0, 10, 32, 32), Err(ImagingError::InvalidClass { .. })));
        assert!(matches!(synth_transit(0, 0, 2, 32, 32), Err(ImagingError::TooFewFrames(2))));
    }
}
