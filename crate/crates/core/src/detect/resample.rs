use super::geometry::BBox;
use super::DetectError;
use crate::imaging::Frame;

/// Copies the region under `bbox`; the timestamp is preserved.
pub fn crop(frame: &Frame, bbox: BBox) -> Result<Frame, DetectError> {
    if !bbox.fits(frame.width(), frame.height()) {
        return Err(DetectError::OutOfBounds { bbox, width: frame.width(), height: frame.height() });
    }
    let src = frame.pixels();
    let row_bytes = bbox.w * 3;
    let mut out = Vec::with_capacity(bbox.h * row_bytes);
    for y in bbox.y..bbox.bottom() {
        let start = (y * frame.width() + bbox.x) * 3;
        out.extend_from_slice(&src[start..start + row_bytes]);
    }
    Ok(Frame::new(bbox.w, bbox.h, out, frame.timestamp).expect("crop dimensions are consistent"))
}

/// Per-axis source taps for the half-pixel-center convention.
fn taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    let max = (src - 1) as f64;
    (0..dst)
        .map(|d| {
            let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, max);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

/// Bilinear resize with source coordinate `s = (d + 0.5)·src/dst − 0.5`, clamped to
/// the image; channels are interpolated independently and rounded half away from zero.
pub fn resize_bilinear(frame: &Frame, out_w: usize, out_h: usize) -> Frame {
    assert!(out_w >= 1 && out_h >= 1, "output dimensions must be at least 1");
    let (w, _) = (frame.width(), frame.height());
    let xs = taps(frame.width(), out_w);
    let ys = taps(frame.height(), out_h);
    let src = frame.pixels();
    let mut out = Vec::with_capacity(out_w * out_h * 3);
    for &(y0, y1, ty) in &ys {
        for &(x0, x1, tx) in &xs {
            for c in 0..3 {
                let p = |x: usize, y: usize| f64::from(src[(y * w + x) * 3 + c]);
                let top = p(x0, y0) + (p(x1, y0) - p(x0, y0)) * tx;
                let bottom = p(x0, y1) + (p(x1, y1) - p(x0, y1)) * tx;
                let v = top + (bottom - top) * ty;
                out.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Frame::new(out_w, out_h, out, frame.timestamp).expect("resize dimensions are consistent")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gray_row(values: &[u8]) -> Frame {
        Frame::new(values.len(), 1, values.iter().flat_map(|&v| [v, v, v]).collect(), 0.0).unwrap()
    }

    fn noise_frame(w: usize, h: usize, seed: u64) -> Frame {
        use rand::Rng as _;
        let mut r = crate::rng::rng(seed);
        Frame::new(w, h, (0..w * h * 3).map(|_| r.random()).collect(), 0.25).unwrap()
    }

    #[test]
    fn crop_examples() {
        let f = noise_frame(9, 7, 1);
        assert_eq!(crop(&f, BBox::new(0, 0, 9, 7)).unwrap(), f);
        let one = crop(&f, BBox::new(4, 3, 1, 1)).unwrap();
        assert_eq!(one.pixel(0, 0), f.pixel(4, 3));
        let once = crop(&f, BBox::new(2, 1, 5, 4)).unwrap();
        let twice = crop(&once, BBox::new(0, 0, 5, 4)).unwrap();
        assert_eq!(once, twice);
        assert_eq!(once.timestamp, 0.25);
        assert!(crop(&f, BBox::new(5, 0, 5, 1)).is_err());
    }

    #[test]
    fn identity_resize() {
        let f = noise_frame(13, 6, 2);
        assert_eq!(resize_bilinear(&f, 13, 6), f);
    }

    #[test]
    fn upsample_half_pixel() {
        let out = resize_bilinear(&gray_row(&[0, 255]), 4, 1);
        let r: Vec<u8> = out.pixels().chunks(3).map(|p| p[0]).collect();
        assert_eq!(r, vec![0, 64, 191, 255]);
    }

    #[test]
    fn constant_stays_constant() {
        let f = Frame::filled(17, 11, [12, 200, 77], 0.0).unwrap();
        for (w, h) in [(1, 1), (5, 3), (32, 32), (40, 9)] {
            let out = resize_bilinear(&f, w, h);
            assert!(out.pixels().chunks(3).all(|p| p == [12, 200, 77]));
        }
    }

    proptest! {
        #[test]
        fn resize_preserves_range(seed in any::<u64>(), w in 1usize..20, h in 1usize..20, ow in 1usize..40, oh in 1usize..40) {
            let f = noise_frame(w, h, seed);
            let out = resize_bilinear(&f, ow, oh);
            for c in 0..3 {
                let lo = f.pixels().iter().skip(c).step_by(3).min().unwrap();
                let hi = f.pixels().iter().skip(c).step_by(3).max().unwrap();
                prop_assert!(out.pixels().iter().skip(c).step_by(3).all(|v| v >= lo && v <= hi));
            }
        }
    }
}
