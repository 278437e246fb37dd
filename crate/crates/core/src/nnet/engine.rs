//! Forward and reverse-mode evaluation.
//!
//! Parameters are stored as `f32`; every sample is evaluated in `f64` and batch
//! gradients are reduced in sample order, so results do not depend on how samples
//! are scheduled across threads.

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::spec::{NetSpec, Plan, Stage};
use super::tensor::Tensor;
use super::NetError;
use crate::rng;
use crate::taxonomy::ProbVector;

/// Weight and bias of one parameterized layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// All trainable parameters, one entry per convolution or dense layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub layers: Vec<LayerParams>,
}

impl ParamSet {
    pub fn zeros(spec: &NetSpec) -> Result<Self, NetError> {
        let layers = spec
            .param_shapes()?
            .into_iter()
            .map(|(w, b)| LayerParams { weight: Tensor::zeros(w), bias: Tensor::zeros(vec![b]) })
            .collect();
        Ok(Self { layers })
    }

    pub fn len(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks that every tensor has the shape `spec` requires.
    pub fn check_against(&self, spec: &NetSpec) -> Result<(), NetError> {
        let shapes = spec.param_shapes()?;
        if shapes.len() != self.layers.len() {
            return Err(NetError::ParamShape(format!(
                "spec has {} parameterized layers, parameters have {}",
                shapes.len(),
                self.layers.len()
            )));
        }
        for (i, ((w, b), l)) in shapes.iter().zip(&self.layers).enumerate() {
            if l.weight.shape() != w.as_slice() || l.bias.shape() != [*b] {
                return Err(NetError::ParamShape(format!(
                    "layer {i}: expected weight {w:?} and bias [{b}], found {:?} and {:?}",
                    l.weight.shape(),
                    l.bias.shape()
                )));
            }
        }
        Ok(())
    }

    /// Flat view of coordinate `index` in layer order, weights before biases.
    pub(crate) fn locate(&self, mut index: usize) -> (usize, bool, usize) {
        for (li, l) in self.layers.iter().enumerate() {
            if index < l.weight.len() {
                return (li, false, index);
            }
            index -= l.weight.len();
            if index < l.bias.len() {
                return (li, true, index);
            }
            index -= l.bias.len();
        }
        panic!("parameter index out of range");
    }
}

/// Variance gain of the output layer.
pub const OUTPUT_GAIN: f64 = 0.1;

/// He-normal weights (`std = sqrt(2 / fan_in)`) and zero biases; the output layer
/// uses `std = sqrt(OUTPUT_GAIN / fan_in)` so an untrained net starts near uniform.
pub fn init_params(spec: &NetSpec, seed: u64) -> Result<ParamSet, NetError> {
    let mut params = ParamSet::zeros(spec)?;
    let last = params.layers.len().saturating_sub(1);
    for (i, layer) in params.layers.iter_mut().enumerate() {
        let shape = layer.weight.shape();
        let fan_in: usize = shape[1..].iter().product();
        let gain = if i == last { OUTPUT_GAIN } else { 2.0 };
        let normal = Normal::new(0.0, (gain / fan_in as f64).sqrt()).expect("positive std");
        let mut r = rng::sub_rng(seed, "init", i as u64);
        for w in layer.weight.data_mut() {
            *w = normal.sample(&mut r) as f32;
        }
    }
    Ok(params)
}

/// Parameter-shaped gradients in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Gradients {
    pub(crate) fn zeros_like(w: &Weights) -> Self {
        Self { layers: w.layers.iter().map(|(w, b)| (vec![0.0; w.len()], vec![0.0; b.len()])).collect() }
    }

    fn add(&mut self, other: &Gradients) {
        for ((aw, ab), (bw, bb)) in self.layers.iter_mut().zip(&other.layers) {
            aw.iter_mut().zip(bw).for_each(|(a, b)| *a += b);
            ab.iter_mut().zip(bb).for_each(|(a, b)| *a += b);
        }
    }

    fn scale(&mut self, s: f64) {
        for (w, b) in &mut self.layers {
            w.iter_mut().chain(b.iter_mut()).for_each(|v| *v *= s);
        }
    }

    /// Same coordinate order as the parameter set.
    pub fn flat(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|(w, b)| w.iter().chain(b).copied()).collect()
    }
}

/// `f64` working copy of the parameters.
pub(crate) struct Weights {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Weights {
    pub fn from_params(p: &ParamSet) -> Self {
        let widen = |t: &Tensor| t.data().iter().map(|&v| f64::from(v)).collect();
        Self { layers: p.layers.iter().map(|l| (widen(&l.weight), widen(&l.bias))).collect() }
    }
}

/// Per-sample intermediate values kept for the backward pass.
pub(crate) struct Trace {
    /// Input of each stage, then the logits.
    acts: Vec<Vec<f64>>,
    /// Patch matrices of convolution stages.
    cols: Vec<Vec<f64>>,
    /// Flat input index of each pooled maximum.
    argmax: Vec<Vec<u32>>,
}

impl Trace {
    pub fn logits(&self) -> &[f64] {
        self.acts.last().expect("trace holds the input")
    }

    /// Hash of every ReLU on/off state and pooling winner; equal signatures mean the
    /// same linear piece of the network.
    pub fn signature(&self, plan: &Plan) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |v: u64| h = rng::mix64(h ^ v);
        let mut pool = 0;
        for (s, stage) in plan.stages.iter().enumerate() {
            match stage {
                Stage::Relu { .. } => {
                    for chunk in self.acts[s].chunks(64) {
                        let bits = chunk.iter().enumerate().fold(0u64, |acc, (i, &v)| acc | (u64::from(v > 0.0) << i));
                        eat(bits);
                    }
                }
                Stage::MaxPool { .. } => {
                    self.argmax[pool].iter().for_each(|&i| eat(u64::from(i)));
                    pool += 1;
                }
                _ => {}
            }
        }
        h
    }
}

/// Builds the `[cin·k·k, ho·wo]` patch matrix of a zero-padded input.
#[allow(clippy::too_many_arguments)]
fn im2col(x: &[f64], cin: usize, h: usize, w: usize, k: usize, stride: usize, pad: usize, ho: usize, wo: usize) -> Vec<f64> {
    let p = ho * wo;
    let mut cols = vec![0.0; cin * k * k * p];
    for c in 0..cin {
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let dst = &mut cols[row * p..(row + 1) * p];
                for oy in 0..ho {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let src = &x[(c * h + iy as usize) * w..(c * h + iy as usize + 1) * w];
                    for ox in 0..wo {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix >= 0 && ix < w as isize {
                            dst[oy * wo + ox] = src[ix as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

#[allow(clippy::too_many_arguments)]
fn col2im(dcols: &[f64], cin: usize, h: usize, w: usize, k: usize, stride: usize, pad: usize, ho: usize, wo: usize) -> Vec<f64> {
    let p = ho * wo;
    let mut dx = vec![0.0; cin * h * w];
    for c in 0..cin {
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let src = &dcols[row * p..(row + 1) * p];
                for oy in 0..ho {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for ox in 0..wo {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix >= 0 && ix < w as isize {
                            dx[(c * h + iy as usize) * w + ix as usize] += src[oy * wo + ox];
                        }
                    }
                }
            }
        }
    }
    dx
}

/// Zero-padded cross-correlation evaluated directly from its definition.
///
/// Reference path for the patch-matrix implementation used by the engine.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_direct(
    x: &[f64],
    weight: &[f64],
    bias: &[f64],
    cin: usize,
    h: usize,
    w: usize,
    cout: usize,
    k: usize,
    stride: usize,
    pad: usize,
) -> Vec<f64> {
    let ho = (h + 2 * pad - k) / stride + 1;
    let wo = (w + 2 * pad - k) / stride + 1;
    let mut out = vec![0.0; cout * ho * wo];
    for o in 0..cout {
        for oy in 0..ho {
            for ox in 0..wo {
                let mut acc = bias[o];
                for c in 0..cin {
                    for ky in 0..k {
                        for kx in 0..k {
                            let iy = (oy * stride + ky) as isize - pad as isize;
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if iy >= 0 && iy < h as isize && ix >= 0 && ix < w as isize {
                                acc += weight[((o * cin + c) * k + ky) * k + kx] * x[(c * h + iy as usize) * w + ix as usize];
                            }
                        }
                    }
                }
                out[(o * ho + oy) * wo + ox] = acc;
            }
        }
    }
    out
}

/// Patch-matrix convolution: `out[o, p] = Σ_j W[o, j]·cols[j, p] + b[o]`.
pub(crate) fn conv_from_cols(cols: &[f64], weight: &[f64], bias: &[f64], cout: usize, p: usize) -> Vec<f64> {
    let rows = cols.len() / p;
    let mut out = vec![0.0; cout * p];
    for o in 0..cout {
        let dst = &mut out[o * p..(o + 1) * p];
        dst.fill(bias[o]);
        for j in 0..rows {
            let wv = weight[o * rows + j];
            if wv == 0.0 {
                continue;
            }
            let src = &cols[j * p..(j + 1) * p];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += wv * s;
            }
        }
    }
    out
}

pub(crate) fn forward_sample(plan: &Plan, w: &Weights, input: &[f32]) -> Trace {
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(plan.stages.len() + 1);
    acts.push(input.iter().map(|&v| f64::from(v)).collect());
    let mut cols_store = Vec::new();
    let mut argmax_store = Vec::new();
    for stage in &plan.stages {
        let x = acts.last().expect("input pushed");
        let y = match *stage {
            Stage::Conv { cin, h, w: wd, cout, k, stride, pad, ho, wo, param } => {
                let cols = im2col(x, cin, h, wd, k, stride, pad, ho, wo);
                let (wt, b) = &w.layers[param];
                let y = conv_from_cols(&cols, wt, b, cout, ho * wo);
                cols_store.push(cols);
                y
            }
            Stage::Relu { .. } => x.iter().map(|&v| v.max(0.0)).collect(),
            Stage::MaxPool { c, h, w: wd, k, stride, ho, wo } => {
                let mut y = vec![0.0; c * ho * wo];
                let mut arg = vec![0u32; c * ho * wo];
                for ch in 0..c {
                    for oy in 0..ho {
                        for ox in 0..wo {
                            let mut best = f64::NEG_INFINITY;
                            let mut bi = 0usize;
                            for ky in 0..k {
                                for kx in 0..k {
                                    let idx = (ch * h + oy * stride + ky) * wd + ox * stride + kx;
                                    if x[idx] > best {
                                        best = x[idx];
                                        bi = idx;
                                    }
                                }
                            }
                            let o = (ch * ho + oy) * wo + ox;
                            y[o] = best;
                            arg[o] = bi as u32;
                        }
                    }
                }
                argmax_store.push(arg);
                y
            }
            Stage::Dense { nin, nout, param } => {
                let (wt, b) = &w.layers[param];
                (0..nout)
                    .map(|o| {
                        let row = &wt[o * nin..(o + 1) * nin];
                        b[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
                    })
                    .collect()
            }
        };
        acts.push(y);
    }
    Trace { acts, cols: cols_store, argmax: argmax_store }
}

/// Index of the first maximum.
pub(crate) fn argmax(v: &[f64]) -> usize {
    v.iter().enumerate().fold(0, |b, (i, &x)| if x > v[b] { i } else { b })
}

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `-ln softmax(logits)[label]` via log-sum-exp.
pub(crate) fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|&v| (v - m).exp()).sum::<f64>().ln();
    lse - logits[label]
}

/// Backpropagates `dlogits` through a trace, accumulating into `grads`.
pub(crate) fn backward_sample(plan: &Plan, w: &Weights, trace: &Trace, dlogits: Vec<f64>, grads: &mut Gradients) {
    let mut delta = dlogits;
    let mut conv_i = trace.cols.len();
    let mut pool_i = trace.argmax.len();
    for (s, stage) in plan.stages.iter().enumerate().rev() {
        let x = &trace.acts[s];
        delta = match *stage {
            Stage::Conv { cin, h, w: wd, cout, k, stride, pad, ho, wo, param } => {
                conv_i -= 1;
                let cols = &trace.cols[conv_i];
                let p = ho * wo;
                let rows = cin * k * k;
                let (wt, _) = &w.layers[param];
                let (gw, gb) = &mut grads.layers[param];
                let mut dcols = vec![0.0; rows * p];
                for o in 0..cout {
                    let d = &delta[o * p..(o + 1) * p];
                    gb[o] += d.iter().sum::<f64>();
                    for j in 0..rows {
                        let c = &cols[j * p..(j + 1) * p];
                        gw[o * rows + j] += d.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
                        let wv = wt[o * rows + j];
                        if wv != 0.0 {
                            for (dc, dv) in dcols[j * p..(j + 1) * p].iter_mut().zip(d) {
                                *dc += wv * dv;
                            }
                        }
                    }
                }
                if s == 0 {
                    break;
                }
                col2im(&dcols, cin, h, wd, k, stride, pad, ho, wo)
            }
            Stage::Relu { .. } => delta.iter().zip(x).map(|(&d, &v)| if v > 0.0 { d } else { 0.0 }).collect(),
            Stage::MaxPool { c, h, w: wd, .. } => {
                pool_i -= 1;
                let mut dx = vec![0.0; c * h * wd];
                for (o, &src) in trace.argmax[pool_i].iter().enumerate() {
                    dx[src as usize] += delta[o];
                }
                dx
            }
            Stage::Dense { nin, nout, param } => {
                let (wt, _) = &w.layers[param];
                let (gw, gb) = &mut grads.layers[param];
                let mut dx = vec![0.0; nin];
                for o in 0..nout {
                    let d = delta[o];
                    gb[o] += d;
                    let grow = &mut gw[o * nin..(o + 1) * nin];
                    for (g, &xv) in grow.iter_mut().zip(x) {
                        *g += d * xv;
                    }
                    if s > 0 {
                        for (dxv, &wv) in dx.iter_mut().zip(&wt[o * nin..(o + 1) * nin]) {
                            *dxv += d * wv;
                        }
                    }
                }
                dx
            }
        };
    }
}

pub(crate) fn check_batch(plan: &Plan, spec: &NetSpec, batch: &Tensor) -> Result<usize, NetError> {
    let mut expected = vec![batch.batch_len()];
    expected.extend_from_slice(&spec.input);
    if batch.shape().len() != 4 || batch.len() != batch.batch_len() * plan.input_len || batch.shape() != expected.as_slice() {
        return Err(NetError::InputShape { expected, got: batch.shape().to_vec() });
    }
    Ok(batch.batch_len())
}

/// Per-sample logits for a `[N, C, H, W]` batch, in `f64`.
pub(crate) fn logits_f64(spec: &NetSpec, params: &ParamSet, batch: &Tensor) -> Result<Vec<Vec<f64>>, NetError> {
    let plan = spec.plan()?;
    params.check_against(spec)?;
    let n = check_batch(&plan, spec, batch)?;
    let w = Weights::from_params(params);
    Ok((0..n)
        .into_par_iter()
        .map(|i| forward_sample(&plan, &w, batch.sample(i)).logits().to_vec())
        .collect())
}

/// Logits `[N, K]`; a trailing softmax layer is not applied here.
pub fn forward(spec: &NetSpec, params: &ParamSet, batch: &Tensor) -> Result<Tensor, NetError> {
    let logits = logits_f64(spec, params, batch)?;
    let n = logits.len();
    let data = logits.into_iter().flatten().map(|v| v as f32).collect();
    Tensor::new(vec![n, spec.classes], data)
}

/// Class probabilities for one image (`[C, H, W]` or `[1, C, H, W]`).
pub fn predict(spec: &NetSpec, params: &ParamSet, image: &Tensor) -> Result<ProbVector, NetError> {
    let batch = if image.shape().len() == 3 {
        let mut shape = vec![1];
        shape.extend_from_slice(image.shape());
        Tensor::new(shape, image.data().to_vec())?
    } else {
        image.clone()
    };
    if batch.batch_len() != 1 {
        return Err(NetError::InputShape { expected: vec![1, spec.input[0], spec.input[1], spec.input[2]], got: batch.shape().to_vec() });
    }
    let logits = logits_f64(spec, params, &batch)?;
    Ok(ProbVector::new(softmax(&logits[0])).expect("softmax output is a distribution"))
}

/// Mean (optionally class-weighted) cross-entropy and its exact gradients.
pub(crate) fn batch_loss_grads(
    plan: &Plan,
    w: &Weights,
    samples: &[&[f32]],
    labels: &[usize],
    class_weights: Option<&[f64]>,
) -> (f64, usize, Gradients) {
    let per_sample: Vec<(f64, bool, Gradients)> = samples
        .par_iter()
        .zip(labels.par_iter())
        .map(|(x, &y)| {
            let trace = forward_sample(plan, w, x);
            let cw = class_weights.map_or(1.0, |c| c[y]);
            let loss = cw * cross_entropy(trace.logits(), y);
            let hit = argmax(trace.logits()) == y;
            let mut d = softmax(trace.logits());
            d[y] -= 1.0;
            d.iter_mut().for_each(|v| *v *= cw);
            let mut g = Gradients::zeros_like(w);
            backward_sample(plan, w, &trace, d, &mut g);
            (loss, hit, g)
        })
        .collect();
    let mut total = Gradients::zeros_like(w);
    let mut loss = 0.0;
    let mut correct = 0;
    for (l, hit, g) in &per_sample {
        loss += l;
        correct += usize::from(*hit);
        total.add(g);
    }
    let n = samples.len() as f64;
    total.scale(1.0 / n);
    (loss / n, correct, total)
}

pub(crate) fn check_labels(labels: &[usize], classes: usize, n: usize) -> Result<(), NetError> {
    if labels.len() != n {
        return Err(NetError::LabelCount { labels: labels.len(), samples: n });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(NetError::InvalidLabel { label: bad, classes });
    }
    Ok(())
}

/// Mean cross-entropy over the batch and reverse-mode gradients of every parameter.
pub fn loss_and_grads(
    spec: &NetSpec,
    params: &ParamSet,
    batch: &Tensor,
    labels: &[usize],
) -> Result<(f64, Gradients), NetError> {
    let plan = spec.plan()?;
    params.check_against(spec)?;
    let n = check_batch(&plan, spec, batch)?;
    check_labels(labels, spec.classes, n)?;
    let samples: Vec<&[f32]> = (0..n).map(|i| batch.sample(i)).collect();
    let (loss, _, grads) = batch_loss_grads(&plan, &Weights::from_params(params), &samples, labels, None);
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::spec::Layer;
    use rand::Rng as _;

    fn random_tensor(shape: Vec<usize>, seed: u64) -> Tensor {
        let mut r = rng::rng(seed);
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| r.random_range(-1.0f32..1.0)).collect()).unwrap()
    }

    #[test]
    fn softmax_of_zeros_is_uniform() {
        assert_eq!(softmax(&[0.0; 4]), vec![0.25; 4]);
        let big = softmax(&[1000.0, 1000.0]);
        assert_eq!(big, vec![0.5, 0.5]);
    }

    #[test]
    fn one_by_one_conv_by_hand() {
        // 2-channel 2x2 input, 1x1 kernel mixing channels: out = 2·a − b + 0.5
        let spec = NetSpec {
            input: [2, 2, 2],
            classes: 4,
            layers: vec![Layer::Conv2d { out_channels: 1, kernel: 1, stride: 1, padding: 0 }, Layer::Flatten],
        };
        let mut p = ParamSet::zeros(&spec).unwrap();
        p.layers[0].weight.data_mut().copy_from_slice(&[2.0, -1.0]);
        p.layers[0].bias.data_mut()[0] = 0.5;
        let x = Tensor::new(vec![1, 2, 2, 2], vec![1.0, 2.0, 3.0, 4.0, 0.0, 1.0, 1.0, 2.0]).unwrap();
        let y = forward(&spec, &p, &x).unwrap();
        assert_eq!(y.data(), &[2.5, 3.5, 5.5, 6.5]);
    }

    #[test]
    fn maxpool_by_hand() {
        let spec = NetSpec {
            input: [1, 2, 2],
            classes: 1,
            layers: vec![Layer::MaxPool2d { kernel: 2, stride: 2 }, Layer::Flatten],
        };
        let p = ParamSet::zeros(&spec).unwrap();
        let x = Tensor::new(vec![1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(forward(&spec, &p, &x).unwrap().data(), &[4.0]);
    }

    #[test]
    fn patch_matrix_matches_direct_convolution() {
        let mut r = rng::rng(4);
        for &(cin, h, w, cout, k, stride, pad) in &[(3, 7, 5, 4, 3, 1, 1), (2, 9, 9, 3, 5, 2, 2), (1, 4, 6, 2, 2, 3, 0), (4, 5, 5, 1, 1, 1, 0)] {
            let x: Vec<f64> = (0..cin * h * w).map(|_| r.random_range(-1.0..1.0)).collect();
            let wt: Vec<f64> = (0..cout * cin * k * k).map(|_| r.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..cout).map(|_| r.random_range(-1.0..1.0)).collect();
            let ho = (h + 2 * pad - k) / stride + 1;
            let wo = (w + 2 * pad - k) / stride + 1;
            let cols = im2col(&x, cin, h, w, k, stride, pad, ho, wo);
            let fast = conv_from_cols(&cols, &wt, &b, cout, ho * wo);
            let slow = conv2d_direct(&x, &wt, &b, cin, h, w, cout, k, stride, pad);
            assert_eq!(fast.len(), slow.len());
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        // <im2col(x), c> == <x, col2im(c)>
        let mut r = rng::rng(6);
        let (cin, h, w, k, s, p) = (2, 6, 5, 3, 2, 1);
        let ho = (h + 2 * p - k) / s + 1;
        let wo = (w + 2 * p - k) / s + 1;
        let x: Vec<f64> = (0..cin * h * w).map(|_| r.random_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..cin * k * k * ho * wo).map(|_| r.random_range(-1.0..1.0)).collect();
        let lhs: f64 = im2col(&x, cin, h, w, k, s, p, ho, wo).iter().zip(&c).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(col2im(&c, cin, h, w, k, s, p, ho, wo)).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn init_is_deterministic_he_normal() {
        let spec = NetSpec {
            input: [100, 1, 1],
            classes: 2,
            layers: vec![Layer::Flatten, Layer::Dense { out_features: 100 }, Layer::Relu, Layer::Dense { out_features: 2 }],
        };
        let a = init_params(&spec, 42).unwrap();
        assert_eq!(a, init_params(&spec, 42).unwrap());
        assert_ne!(a, init_params(&spec, 43).unwrap());
        assert!(a.layers[0].bias.data().iter().all(|&b| b == 0.0));
        let w = a.layers[0].weight.data();
        let n = w.len() as f64;
        let mean = w.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
        let std = (w.iter().map(|&v| (f64::from(v) - mean).powi(2)).sum::<f64>() / n).sqrt();
        let target = (2.0f64 / 100.0).sqrt();
        assert!((std - target).abs() / target < 0.1, "std {std} vs {target}");
        let out = a.layers[1].weight.data();
        let out_std = (out.iter().map(|&v| f64::from(v).powi(2)).sum::<f64>() / out.len() as f64).sqrt();
        assert!(out_std < target);
    }

    #[test]
    fn batch_equals_single() {
        let spec = NetSpec::grad_check_reference();
        let p = init_params(&spec, 1).unwrap();
        let x = random_tensor(vec![5, 3, 16, 16], 2);
        let all = forward(&spec, &p, &x).unwrap();
        for i in 0..5 {
            let one = Tensor::stack(&[3, 16, 16], &[x.sample(i)]).unwrap();
            let y = forward(&spec, &p, &one).unwrap();
            for (a, b) in y.data().iter().zip(all.sample(i)) {
                assert!((a - b).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn uniform_output_loss_is_ln_k() {
        for k in [2usize, 4, 16] {
            let spec = NetSpec { input: [3, 2, 2], classes: k, layers: vec![Layer::Flatten, Layer::Dense { out_features: k }] };
            let p = ParamSet::zeros(&spec).unwrap();
            let x = random_tensor(vec![3, 3, 2, 2], 5);
            let labels: Vec<usize> = (0..3).map(|i| i % k).collect();
            let (loss, _) = loss_and_grads(&spec, &p, &x, &labels).unwrap();
            assert!((loss - (k as f64).ln()).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn confident_prediction_has_vanishing_loss() {
        let spec = NetSpec { input: [1, 1, 1], classes: 2, layers: vec![Layer::Flatten, Layer::Dense { out_features: 2 }] };
        let mut p = ParamSet::zeros(&spec).unwrap();
        p.layers[0].bias.data_mut().copy_from_slice(&[40.0, -40.0]);
        let x = Tensor::new(vec![1, 1, 1, 1], vec![0.0]).unwrap();
        let (loss, _) = loss_and_grads(&spec, &p, &x, &[0]).unwrap();
        assert!(loss < 1e-30);
    }

    #[test]
    fn rejects_bad_inputs() {
        let spec = NetSpec::grad_check_reference();
        let p = init_params(&spec, 1).unwrap();
        let wrong = random_tensor(vec![1, 3, 8, 8], 1);
        assert!(matches!(forward(&spec, &p, &wrong), Err(NetError::InputShape { .. })));
        let x = random_tensor(vec![2, 3, 16, 16], 1);
        assert!(matches!(loss_and_grads(&spec, &p, &x, &[0, 4]), Err(NetError::InvalidLabel { label: 4, classes: 4 })));
        assert!(matches!(loss_and_grads(&spec, &p, &x, &[0]), Err(NetError::LabelCount { .. })));
    }

    #[test]
    fn predict_is_a_distribution() {
        let spec = NetSpec::grad_check_reference();
        let p = init_params(&spec, 3).unwrap();
        let x = random_tensor(vec![3, 16, 16], 9);
        let probs = predict(&spec, &p, &x).unwrap();
        let s: f64 = probs.values().iter().sum();
        assert!((s - 1.0).abs() < 1e-6);
        let logits = forward(&spec, &p, &Tensor::stack(&[3, 16, 16], &[x.data()]).unwrap()).unwrap();
        let am = logits.data().iter().enumerate().fold(0, |b, (i, &v)| if v > logits.data()[b] { i } else { b });
        assert_eq!(probs.argmax(), am);
    }
}
