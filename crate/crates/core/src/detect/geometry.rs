use serde::{Deserialize, Serialize};

use super::{DetectError, Mask};

/// Axis-aligned box in pixel cells: columns `x..x+w`, rows `y..y+h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl BBox {
    pub const fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn right(&self) -> usize {
        self.x + self.w
    }

    pub fn bottom(&self) -> usize {
        self.y + self.h
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.w >= 1 && self.h >= 1 && self.right() <= width && self.bottom() <= height
    }

    pub fn contains_box(&self, other: &BBox) -> bool {
        self.x <= other.x && self.y <= other.y && self.right() >= other.right() && self.bottom() >= other.bottom()
    }

    /// Real-valued center.
    pub fn center(&self) -> (f64, f64) {
        (self.x as f64 + self.w as f64 / 2.0, self.y as f64 + self.h as f64 / 2.0)
    }

    pub fn intersection(&self, other: &BBox) -> usize {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        x1.saturating_sub(x0) * y1.saturating_sub(y0)
    }
}

fn round_half_down(v: f64) -> f64 {
    (v - 0.5).ceil()
}

/// Grows `bbox` into a square of side `ceil(max(w, h)·(1 + 2·margin))` centered on it.
///
/// The corner is `round_half_down(center − side/2)`; a square that would leave the
/// image is translated back inside, and a side larger than the shorter image
/// dimension is clamped to it.
pub fn square_expand(bbox: BBox, margin: f64, image_w: usize, image_h: usize) -> BBox {
    let longest = bbox.w.max(bbox.h) as f64;
    let side_real = longest * (1.0 + 2.0 * margin);
    // 1e-9 absorbs products such as 10 × 1.1 = 11.000000000000002
    let side = ((side_real - 1e-9).ceil() as usize).max(1).min(image_w.min(image_h));
    let (cx, cy) = bbox.center();
    let half = side as f64 / 2.0;
    let place = |c: f64, limit: usize| -> usize {
        let corner = round_half_down(c - half);
        corner.clamp(0.0, (limit - side) as f64) as usize
    };
    BBox::new(place(cx, image_w), place(cy, image_h), side, side)
}

/// Box intersection over union; 0 for disjoint boxes.
pub fn bbox_iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection(b);
    let union = a.area() + b.area() - inter;
    if union == 0 {
        return 0.0;
    }
    inter as f64 / union as f64
}

/// Mask intersection over union; two empty masks score 1.
pub fn mask_iou(pred: &Mask, truth: &Mask) -> Result<f64, DetectError> {
    if pred.width() != truth.width() || pred.height() != truth.height() {
        return Err(DetectError::DimensionMismatch {
            a_w: pred.width(),
            a_h: pred.height(),
            b_w: truth.width(),
            b_h: truth.height(),
        });
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &t) in pred.bits().iter().zip(truth.bits()) {
        inter += usize::from(p && t);
        union += usize::from(p || t);
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}
