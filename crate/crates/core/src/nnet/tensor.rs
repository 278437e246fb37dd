use super::NetError;
use crate::imaging::Frame;

/// Dense row-major array of 32-bit reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self, NetError> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(NetError::TensorSize { shape, len: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(NetError::NonFinite);
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![0.0; n] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Leading dimension, or 1 for a rank-0 tensor.
    pub fn batch_len(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    /// The `i`-th slice along the leading dimension.
    pub fn sample(&self, i: usize) -> &[f32] {
        let stride = self.data.len() / self.batch_len().max(1);
        &self.data[i * stride..(i + 1) * stride]
    }

    /// Stacks equally sized samples into `[N, ..sample_shape]`.
    pub fn stack(sample_shape: &[usize], samples: &[&[f32]]) -> Result<Self, NetError> {
        let mut shape = vec![samples.len()];
        shape.extend_from_slice(sample_shape);
        let data: Vec<f32> = samples.iter().flat_map(|s| s.iter().copied()).collect();
        Self::new(shape, data)
    }
}

/// Maps 8-bit RGB frames to a `[N, 3, H, W]` tensor with values in `[-1, 1]`.
pub fn frames_to_tensor(frames: &[Frame]) -> Result<Tensor, NetError> {
    let first = frames.first().ok_or(NetError::EmptyData)?;
    let (w, h) = (first.width(), first.height());
    let mut data = Vec::with_capacity(frames.len() * 3 * w * h);
    for f in frames {
        if (f.width(), f.height()) != (w, h) {
            return Err(NetError::InputShape { expected: vec![3, h, w], got: vec![3, f.height(), f.width()] });
        }
        let px = f.pixels();
        for c in 0..3 {
            data.extend(px.iter().skip(c).step_by(3).map(|&v| f32::from(v) / 127.5 - 1.0));
        }
    }
    Tensor::new(vec![frames.len(), 3, h, w], data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invariants() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 6]).is_ok());
        assert!(matches!(Tensor::new(vec![2, 3], vec![0.0; 5]), Err(NetError::TensorSize { .. })));
        assert!(matches!(Tensor::new(vec![1], vec![f32::NAN]), Err(NetError::NonFinite)));
    }

    #[test]
    fn frame_layout_is_planar() {
        let f = Frame::new(2, 1, vec![0, 255, 0, 255, 0, 0], 0.0).unwrap();
        let t = frames_to_tensor(&[f]).unwrap();
        assert_eq!(t.shape(), &[1, 3, 1, 2]);
        assert_eq!(t.data(), &[-1.0, 1.0, 1.0, -1.0, -1.0, -1.0]);
    }
}
