//! Binary PNM I/O: RGB frames as P6, masks as P5 (0 = background, 255 = insect).

use std::io::Cursor;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder, ImageFormat};
use thiserror::Error;

use super::Mask;
use crate::imaging::Frame;

#[derive(Debug, Error)]
pub enum PnmError {
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("pnm codec: {0}")]
    Codec(#[from] image::ImageError),
}

pub fn encode_ppm(frame: &Frame) -> Result<Vec<u8>, PnmError> {
    let mut buf = Vec::new();
    PnmEncoder::new(&mut buf)
        .with_subtype(PnmSubtype::Pixmap(SampleEncoding::Binary))
        .write_image(frame.pixels(), frame.width() as u32, frame.height() as u32, ExtendedColorType::Rgb8)?;
    Ok(buf)
}

pub fn encode_pgm_mask(mask: &Mask) -> Result<Vec<u8>, PnmError> {
    let gray: Vec<u8> = mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
    let mut buf = Vec::new();
    PnmEncoder::new(&mut buf)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(&gray, mask.width() as u32, mask.height() as u32, ExtendedColorType::L8)?;
    Ok(buf)
}

pub fn decode_ppm(bytes: &[u8]) -> Result<Frame, PnmError> {
    let img = image::load(Cursor::new(bytes), ImageFormat::Pnm)?.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok(Frame::new(w, h, img.into_raw(), 0.0).expect("decoded RGB buffer matches its dimensions"))
}

/// Any nonzero sample counts as insect.
pub fn decode_pgm_mask(bytes: &[u8]) -> Result<Mask, PnmError> {
    let img = image::load(Cursor::new(bytes), ImageFormat::Pnm)?.to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let bits = img.into_raw().into_iter().map(|v| v != 0).collect();
    Ok(Mask::new(w, h, bits).expect("decoded gray buffer matches its dimensions"))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PnmError + '_ {
    move |source| PnmError::Io { path: path.display().to_string(), source }
}

pub fn write_ppm(path: &Path, frame: &Frame) -> Result<(), PnmError> {
    std::fs::write(path, encode_ppm(frame)?).map_err(io_err(path))
}

pub fn read_ppm(path: &Path) -> Result<Frame, PnmError> {
    decode_ppm(&std::fs::read(path).map_err(io_err(path))?)
}

pub fn write_pgm_mask(path: &Path, mask: &Mask) -> Result<(), PnmError> {
    std::fs::write(path, encode_pgm_mask(mask)?).map_err(io_err(path))
}

pub fn read_pgm_mask(path: &Path) -> Result<Mask, PnmError> {
    decode_pgm_mask(&std::fs::read(path).map_err(io_err(path))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_header_and_roundtrip() {
        let f = Frame::new(2, 1, vec![1, 2, 3, 250, 251, 252], 0.0).unwrap();
        let bytes = encode_ppm(&f).unwrap();
        assert!(bytes.starts_with(b"P6\n2 1 255\n"));
        assert_eq!(&bytes[bytes.len() - 6..], &[1, 2, 3, 250, 251, 252]);
        assert_eq!(decode_ppm(&bytes).unwrap(), f);
    }

    #[test]
    fn pgm_mask_roundtrip() {
        let m = Mask::from_points(3, 2, &[(0, 0), (2, 1)]);
        let bytes = encode_pgm_mask(&m).unwrap();
        assert!(bytes.starts_with(b"P5\n"));
        assert_eq!(decode_pgm_mask(&bytes).unwrap(), m);
    }

    #[test]
    fn rejects_garbage() {
        assert!(decode_ppm(b"P6\n2 2 255\n\x00").is_err());
        assert!(decode_pgm_mask(b"hello").is_err());
    }
}
