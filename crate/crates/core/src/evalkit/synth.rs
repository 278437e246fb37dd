//! Parametric synthetic insects.
//!
//! Class `c` belongs to group `c / 4`, which fixes the hue pair, body aspect and
//! appendages, and uses pattern `c % 4`, a two-color body pattern whose period is a
//! few pixels at crop resolution. All four patterns cover about half the body with
//! each hue, so a heavily downsampled view keeps the group but loses the pattern.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::detect::{crop, resize_bilinear, square_expand, BBox, Mask};
use crate::imaging::Frame;
use crate::rng::{self, Rng};

pub const MAX_CLASSES: usize = 16;

/// Long-tailed per-class counts, largest first.
pub const LONG_TAIL_PROFILE: [usize; 16] = [300, 150, 100, 75, 60, 50, 42, 36, 31, 27, 23, 20, 17, 15, 13, 12];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pattern {
    /// Bands across the body axis.
    Transverse(u32),
    /// Stripes along the body axis.
    Longitudinal(u32),
    /// Cells along × across.
    Checker(u32, u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Appearance {
    pub primary: [u8; 3],
    pub secondary: [u8; 3],
    /// Body length over body width.
    pub aspect: f64,
    pub pattern: Pattern,
    pub leg_pairs: usize,
    pub antennae: bool,
}

const HUES: [([u8; 3], [u8; 3]); 4] = [
    ([236, 196, 44], [34, 28, 22]),
    ([226, 118, 36], [96, 52, 26]),
    ([92, 178, 70], [26, 74, 34]),
    ([208, 46, 40], [30, 22, 24]),
];
const ASPECTS: [f64; 4] = [1.6, 1.9, 2.2, 2.5];
const LEGS: [usize; 4] = [3, 2, 3, 2];
const PATTERNS: [Pattern; 4] = [Pattern::Transverse(4), Pattern::Transverse(8), Pattern::Longitudinal(4), Pattern::Checker(6, 2)];

pub fn appearance(class_id: usize) -> Result<Appearance, EvalError> {
    if class_id >= MAX_CLASSES {
        return Err(EvalError::InvalidClass { class_id, classes: MAX_CLASSES });
    }
    let g = class_id / 4;
    Ok(Appearance {
        primary: HUES[g].0,
        secondary: HUES[g].1,
        aspect: ASPECTS[g],
        pattern: PATTERNS[class_id % 4],
        leg_pairs: LEGS[g],
        antennae: g.is_multiple_of(2),
    })
}

/// Placement of one insect in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub cx: f64,
    pub cy: f64,
    /// Body axis angle in radians, head towards `+angle`.
    pub angle: f64,
    /// Half the body length in pixels.
    pub half_length: f64,
}

/// Body half-length relative to the shorter frame side.
pub const RELATIVE_HALF_LENGTH: f64 = 0.085;
/// Furthest extent of legs and antennae, in body half-lengths.
const REACH: f64 = 1.6;

impl Pose {
    /// Near-horizontal pose (±25°, either heading) with ±10 % scale jitter, fully inside the frame.
    pub fn random(r: &mut Rng, width: usize, height: usize) -> Self {
        let base = RELATIVE_HALF_LENGTH * width.min(height) as f64;
        let half_length = base * r.random_range(0.9..1.1);
        let flip = if r.random_bool(0.5) { std::f64::consts::PI } else { 0.0 };
        let angle = flip + r.random_range(-25f64..25.0).to_radians();
        let m = (REACH * half_length).ceil() + 1.0;
        let cx = r.random_range(m..(width as f64 - m).max(m + 1e-9));
        let cy = r.random_range(m..(height as f64 - m).max(m + 1e-9));
        Self { cx, cy, angle, half_length }
    }
}

/// Distance from `p` to segment `a`–`b`.
fn seg_dist(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let t = (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    ((p.0 - a.0 - t * dx).powi(2) + (p.1 - a.1 - t * dy).powi(2)).sqrt()
}

/// Shade at body coordinates `(u, v)`: `u` along the axis, `v` across, both in
/// half-lengths. Returns `None` off the insect, else `(rgb, shading)`.
fn shade(app: &Appearance, u: f64, v: f64) -> Option<[f64; 3]> {
    let to = |c: [u8; 3], k: f64| [f64::from(c[0]) * k, f64::from(c[1]) * k, f64::from(c[2]) * k];
    let half_width = 1.0 / app.aspect;
    let vn = v / half_width;
    if u * u + vn * vn <= 1.0 {
        let t = ((u + 1.0) / 2.0).clamp(0.0, 0.999_999);
        let s = ((vn + 1.0) / 2.0).clamp(0.0, 0.999_999);
        let band = |x: f64, n: u32| (x * f64::from(n)).floor() as u32;
        let pick = match app.pattern {
            Pattern::Transverse(n) => band(t, n) % 2,
            Pattern::Longitudinal(n) => band(s, n) % 2,
            Pattern::Checker(a, b) => (band(t, a) + band(s, b)) % 2,
        };
        let light = 1.0 - 0.25 * vn * vn;
        return Some(to(if pick == 0 { app.primary } else { app.secondary }, light));
    }
    let head_r = 0.55 * half_width;
    if (u - 1.0 - 0.6 * head_r).powi(2) + v * v <= head_r * head_r {
        return Some(to(app.secondary, 0.9));
    }
    let thick = 0.05;
    for i in 0..app.leg_pairs {
        let u0 = if app.leg_pairs == 1 { 0.0 } else { -0.45 + 0.9 * i as f64 / (app.leg_pairs - 1) as f64 };
        for side in [-1.0, 1.0] {
            let a = (u0, side * 0.6 * half_width);
            let knee = (u0 + 0.15, side * (half_width + 0.35));
            let foot = (u0 - 0.1, side * (half_width + 0.6));
            if seg_dist((u, v), a, knee) <= thick || seg_dist((u, v), knee, foot) <= thick {
                return Some(to(app.secondary, 0.8));
            }
        }
    }
    if app.antennae {
        for side in [-1.0, 1.0] {
            let a = (1.0 + head_r, side * 0.15 * half_width);
            let b = (1.5, side * (0.35 + 0.3 * half_width));
            if seg_dist((u, v), a, b) <= thick * 0.8 {
                return Some(to(app.secondary, 0.8));
            }
        }
    }
    None
}

/// Draws the insect with 2×2 supersampling; mask pixels are those at least half covered.
pub fn render_insect(frame: &mut Frame, mask: &mut Mask, app: &Appearance, pose: &Pose) {
    let (w, h) = (frame.width(), frame.height());
    let reach = REACH * pose.half_length + 2.0;
    let x0 = (pose.cx - reach).floor().max(0.0) as usize;
    let y0 = (pose.cy - reach).floor().max(0.0) as usize;
    let x1 = ((pose.cx + reach).ceil() as usize).min(w);
    let y1 = ((pose.cy + reach).ceil() as usize).min(h);
    let (sin, cos) = pose.angle.sin_cos();
    for y in y0..y1 {
        for x in x0..x1 {
            let mut acc = [0.0; 3];
            let mut hits = 0;
            for (ox, oy) in [(0.25, 0.25), (0.75, 0.25), (0.25, 0.75), (0.75, 0.75)] {
                let dx = x as f64 + ox - pose.cx;
                let dy = y as f64 + oy - pose.cy;
                let u = (dx * cos + dy * sin) / pose.half_length;
                let v = (-dx * sin + dy * cos) / pose.half_length;
                if let Some(c) = shade(app, u, v) {
                    (0..3).for_each(|k| acc[k] += c[k]);
                    hits += 1;
                }
            }
            if hits == 0 {
                continue;
            }
            let bg = frame.pixel(x, y);
            let mut out = [0u8; 3];
            for k in 0..3 {
                let v = (acc[k] + f64::from(bg[k]) * f64::from(4 - hits)) / 4.0;
                out[k] = v.round().clamp(0.0, 255.0) as u8;
            }
            frame.set_pixel(x, y, out);
            if hits >= 2 {
                mask.set(x, y, true);
            }
        }
    }
}

/// Neutral gray backdrop with white-balance jitter.
pub fn gray_background(width: usize, height: usize, r: &mut Rng, timestamp: f64) -> Frame {
    let level = r.random_range(130.0..170.0);
    let tint: [f64; 3] = std::array::from_fn(|_| r.random_range(0.95..1.05));
    let rgb = tint.map(|t| (level * t).round().clamp(0.0, 255.0) as u8);
    Frame::filled(width, height, rgb, timestamp).expect("positive dimensions")
}

/// Uniform integer noise in `[-amplitude, amplitude]` on every channel.
pub fn add_noise(frame: &mut Frame, amplitude: i16, r: &mut Rng) {
    if amplitude == 0 {
        return;
    }
    for p in frame.pixels_mut() {
        *p = (i16::from(*p) + r.random_range(-amplitude..=amplitude)).clamp(0, 255) as u8;
    }
}

/// A few dark specks of at most `max_area` pixels, not part of any mask.
fn add_specks(frame: &mut Frame, r: &mut Rng, count: usize) {
    let (w, h) = (frame.width(), frame.height());
    for _ in 0..count {
        let x = r.random_range(0..w.saturating_sub(2).max(1));
        let y = r.random_range(0..h.saturating_sub(2).max(1));
        let shade = r.random_range(60u8..110);
        for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            if x + dx < w && y + dy < h && r.random_bool(0.7) {
                frame.set_pixel(x + dx, y + dy, [shade; 3]);
            }
        }
    }
}

/// Tight box of all set pixels.
pub fn tight_box(mask: &Mask) -> Option<BBox> {
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) {
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
            }
        }
    }
    (x0 != usize::MAX).then(|| BBox::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1))
}

/// One rendered insect with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub class_id: usize,
    pub frame: Frame,
    pub mask: Mask,
    pub true_box: BBox,
    pub pose: Pose,
}

/// Renders one insect of `class_id` into a `width`×`height` frame.
pub fn synth_scene(class_id: usize, seed: u64, width: usize, height: usize) -> Result<Scene, EvalError> {
    if width < 16 || height < 16 {
        return Err(EvalError::InvalidSize(format!("frame {width}x{height} is below 16 px")));
    }
    let app = appearance(class_id)?;
    let mut r = rng::rng(seed);
    let mut frame = gray_background(width, height, &mut r, 0.0);
    let pose = Pose::random(&mut r, width, height);
    let mut mask = Mask::empty(width, height);
    render_insect(&mut frame, &mut mask, &app, &pose);
    let specks = r.random_range(0..4);
    add_specks(&mut frame, &mut r, specks);
    add_noise(&mut frame, 6, &mut r);
    let true_box = tight_box(&mask).expect("insect lies inside the frame");
    Ok(Scene { class_id, frame, mask, true_box, pose })
}

/// Segmentation-like corruption of a ground-truth mask: random flips on the mask
/// boundary plus `dust` blobs each smaller than `min_area`, anywhere in the frame.
pub fn perturb_mask(mask: &Mask, min_area: usize, dust: usize, seed: u64) -> Mask {
    let mut r = rng::rng(seed);
    let (w, h) = (mask.width(), mask.height());
    let mut out = mask.clone();
    for y in 0..h {
        for x in 0..w {
            let v = mask.get(x, y);
            let edge = [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)].iter().any(|&(dx, dy)| {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h && mask.get(nx as usize, ny as usize) != v
            });
            if edge && r.random_bool(0.3) {
                out.set(x, y, !v);
            }
        }
    }
    let max_blob = min_area.saturating_sub(1).max(1);
    for _ in 0..dust {
        let area = r.random_range(1..=max_blob);
        let (mut x, mut y) = (r.random_range(0..w), r.random_range(0..h));
        for _ in 0..area {
            out.set(x, y, true);
            match r.random_range(0..4) {
                0 => x = (x + 1).min(w - 1),
                1 => x = x.saturating_sub(1),
                2 => y = (y + 1).min(h - 1),
                _ => y = y.saturating_sub(1),
            }
        }
    }
    out
}

/// Generator settings for [`synth_dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Images per class; its length is the class count.
    pub counts: Vec<usize>,
    /// Side of the square full frame the insect is rendered into.
    pub frame_size: usize,
    /// Side of both stored variants.
    pub image_size: usize,
    /// Crop margin for the cropped variant.
    pub margin: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { counts: vec![64; 16], frame_size: 256, image_size: 32, margin: 0.05, seed: 0 }
    }
}

impl SynthConfig {
    pub fn balanced(classes: usize, per_class: usize, seed: u64) -> Self {
        Self { counts: vec![per_class; classes], seed, ..Self::default() }
    }

    pub fn long_tail(seed: u64) -> Self {
        Self { counts: LONG_TAIL_PROFILE.to_vec(), seed, ..Self::default() }
    }
}

/// One dataset image in both variants.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthItem {
    pub class_id: usize,
    /// The whole frame resized to `image_size`.
    pub full: Frame,
    /// The square crop around the insect resized to `image_size`.
    pub cropped: Frame,
    /// Tight box of the insect in the full frame.
    pub true_box: BBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub config: SynthConfig,
    /// Grouped by class, in class order.
    pub items: Vec<SynthItem>,
}

impl SynthDataset {
    pub fn labels(&self) -> Vec<usize> {
        self.items.iter().map(|i| i.class_id).collect()
    }
}

/// Renders every image of the dataset; image `i` of class `c` is seeded from `(seed, c, i)`.
pub fn synth_dataset(cfg: &SynthConfig) -> Result<SynthDataset, EvalError> {
    if cfg.counts.is_empty() || cfg.counts.len() > MAX_CLASSES {
        return Err(EvalError::InvalidSize(format!("class count {} not in 1..={MAX_CLASSES}", cfg.counts.len())));
    }
    if cfg.frame_size < 16 || cfg.image_size < 16 {
        return Err(EvalError::InvalidSize(format!("sizes must be at least 16 px (frame {}, image {})", cfg.frame_size, cfg.image_size)));
    }
    let jobs: Vec<(usize, usize)> = cfg.counts.iter().enumerate().flat_map(|(c, &n)| (0..n).map(move |i| (c, i))).collect();
    let items = jobs
        .par_iter()
        .map(|&(c, i)| {
            let seed = rng::derive_seed(cfg.seed, "synth", ((c as u64) << 32) | i as u64);
            let scene = synth_scene(c, seed, cfg.frame_size, cfg.frame_size)?;
            let square = square_expand(scene.true_box, cfg.margin, cfg.frame_size, cfg.frame_size);
            let cropped = crop(&scene.frame, square).expect("square box fits the frame");
            Ok(SynthItem {
                class_id: c,
                full: resize_bilinear(&scene.frame, cfg.image_size, cfg.image_size),
                cropped: resize_bilinear(&cropped, cfg.image_size, cfg.image_size),
                true_box: scene.true_box,
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    Ok(SynthDataset { config: cfg.clone(), items })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::{bbox_iou, mask_to_bbox, CropConfig};

    #[test]
    fn classes_have_distinct_appearance() {
        let all: Vec<Appearance> = (0..16).map(|c| appearance(c).unwrap()).collect();
        for i in 0..16 {
            for j in i + 1..16 {
                assert_ne!(all[i], all[j]);
            }
        }
        assert!(appearance(16).is_err());
    }

    #[test]
    fn scene_is_deterministic_and_boxed() {
        let a = synth_scene(5, 9, 256, 256).unwrap();
        assert_eq!(a, synth_scene(5, 9, 256, 256).unwrap());
        assert_ne!(a.frame, synth_scene(5, 10, 256, 256).unwrap().frame);
        let b = a.true_box;
        assert!(b.fits(256, 256));
        assert!(b.w >= 20 && b.w <= 80, "{b:?}");
    }

    #[test]
    fn mask_box_recovers_truth() {
        for seed in 0..20 {
            let s = synth_scene(seed as usize % 16, seed, 256, 256).unwrap();
            let cfg = CropConfig { min_area: 20, ..CropConfig::default() };
            let got = mask_to_bbox(&s.mask, &cfg).unwrap();
            assert!(bbox_iou(&got, &s.true_box) >= 0.9);
        }
    }

    #[test]
    fn dust_stays_below_min_area() {
        let s = synth_scene(0, 1, 128, 128).unwrap();
        let empty = Mask::empty(128, 128);
        for seed in 0..50 {
            let dusty = perturb_mask(&empty, 24, 1, seed);
            assert!(dusty.count() >= 1 && dusty.count() < 24);
        }
        assert_eq!(perturb_mask(&s.mask, 24, 5, 7), perturb_mask(&s.mask, 24, 5, 7));
    }

    #[test]
    fn dataset_layout() {
        let cfg = SynthConfig { counts: vec![2, 3], frame_size: 64, image_size: 16, ..SynthConfig::default() };
        let d = synth_dataset(&cfg).unwrap();
        assert_eq!(d.labels(), vec![0, 0, 1, 1, 1]);
        assert!(d.items.iter().all(|i| i.full.width() == 16 && i.cropped.height() == 16));
        assert_eq!(d, synth_dataset(&cfg).unwrap());
        assert!(synth_dataset(&SynthConfig { counts: vec![1; 17], ..cfg.clone() }).is_err());
        assert!(synth_dataset(&SynthConfig { image_size: 8, ..cfg }).is_err());
    }
}
