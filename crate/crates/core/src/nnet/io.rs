//! Binary parameter files.
//!
//! Layout, all integers `u32` little-endian:
//!
//! ```text
//! magic "IVNP" | version | layer count
//! per layer: weight tensor, bias tensor
//! tensor: rank | dims[rank] | f32 LE data
//! ```

use std::path::Path;

use super::engine::{LayerParams, ParamSet};
use super::spec::NetSpec;
use super::tensor::Tensor;
use super::NetError;

pub const PARAMS_MAGIC: [u8; 4] = *b"IVNP";
pub const PARAMS_VERSION: u32 = 1;

pub fn encode_params(params: &ParamSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + params.len() * 4);
    out.extend_from_slice(&PARAMS_MAGIC);
    out.extend_from_slice(&PARAMS_VERSION.to_le_bytes());
    out.extend_from_slice(&(params.layers.len() as u32).to_le_bytes());
    for layer in &params.layers {
        for t in [&layer.weight, &layer.bias] {
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], NetError> {
        if self.bytes.len() < n {
            return Err(NetError::Truncated);
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32, NetError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn tensor(&mut self) -> Result<Tensor, NetError> {
        let rank = self.u32()? as usize;
        if rank > 8 {
            return Err(NetError::ParamShape(format!("tensor rank {rank}")));
        }
        let shape = (0..rank).map(|_| self.u32().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or(NetError::Truncated)?;
        let raw = self.take(n.checked_mul(4).ok_or(NetError::Truncated)?)?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        Tensor::new(shape, data)
    }
}

pub fn decode_params(bytes: &[u8]) -> Result<ParamSet, NetError> {
    let mut r = Reader { bytes };
    if r.take(4).map_err(|_| NetError::BadMagic)? != PARAMS_MAGIC {
        return Err(NetError::BadMagic);
    }
    let version = r.u32()?;
    if version != PARAMS_VERSION {
        return Err(NetError::UnsupportedVersion(version));
    }
    let count = r.u32()? as usize;
    let mut layers = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let weight = r.tensor()?;
        let bias = r.tensor()?;
        layers.push(LayerParams { weight, bias });
    }
    if !r.bytes.is_empty() {
        return Err(NetError::ParamShape(format!("{} trailing bytes", r.bytes.len())));
    }
    Ok(ParamSet { layers })
}

pub fn save_params(params: &ParamSet, path: impl AsRef<Path>) -> Result<(), NetError> {
    std::fs::write(path, encode_params(params))?;
    Ok(())
}

/// Reads a parameter file and checks it against `spec`.
pub fn load_params(path: impl AsRef<Path>, spec: &NetSpec) -> Result<ParamSet, NetError> {
    let params = decode_params(&std::fs::read(path)?)?;
    params.check_against(spec)?;
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::init_params;

    #[test]
    fn round_trip_is_bit_identical() {
        let spec = NetSpec::grad_check_reference();
        let p = init_params(&spec, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.bin");
        save_params(&p, &path).unwrap();
        let q = load_params(&path, &spec).unwrap();
        assert_eq!(encode_params(&q), encode_params(&p));
        assert_eq!(q, p);
    }

    #[test]
    fn distinct_load_errors() {
        let spec = NetSpec::grad_check_reference();
        let bytes = encode_params(&init_params(&spec, 2).unwrap());
        assert!(matches!(decode_params(&bytes[..bytes.len() - 3]), Err(NetError::Truncated)));
        assert!(matches!(decode_params(&bytes[..10]), Err(NetError::Truncated)));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_params(&bad), Err(NetError::BadMagic)));
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert!(matches!(decode_params(&v2), Err(NetError::UnsupportedVersion(2))));
    }

    #[test]
    fn mismatched_spec_is_a_shape_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.bin");
        save_params(&init_params(&NetSpec::desk_reference(16), 1).unwrap(), &path).unwrap();
        assert!(matches!(load_params(&path, &NetSpec::desk_reference(8)), Err(NetError::ParamShape(_))));
    }
}
