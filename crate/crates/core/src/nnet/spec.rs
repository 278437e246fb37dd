use serde::{Deserialize, Serialize};

use super::NetError;

fn one() -> usize {
    1
}

/// One layer of a [`NetSpec`], tagged by `type` in JSON.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Layer {
    Conv2d {
        out_channels: usize,
        kernel: usize,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        padding: usize,
    },
    Relu,
    MaxPool2d { kernel: usize, stride: usize },
    Flatten,
    Dense { out_features: usize },
    /// Output activation; only allowed as the final layer.
    Softmax,
}

/// Declarative CNN architecture: input `[channels, height, width]`, layers, class count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetSpec {
    pub input: [usize; 3],
    pub classes: usize,
    pub layers: Vec<Layer>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Shape {
    Image { c: usize, h: usize, w: usize },
    Flat(usize),
}

impl Shape {
    pub(crate) fn len(self) -> usize {
        match self {
            Shape::Image { c, h, w } => c * h * w,
            Shape::Flat(n) => n,
        }
    }
}

/// Resolved layer with its input geometry.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Stage {
    Conv { cin: usize, h: usize, w: usize, cout: usize, k: usize, stride: usize, pad: usize, ho: usize, wo: usize, param: usize },
    Relu { len: usize },
    MaxPool { c: usize, h: usize, w: usize, k: usize, stride: usize, ho: usize, wo: usize },
    Dense { nin: usize, nout: usize, param: usize },
}

/// Shape-checked execution plan; `Flatten` and the trailing `Softmax` vanish here.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Plan {
    pub stages: Vec<Stage>,
    pub input_len: usize,
    pub classes: usize,
    /// `(weight shape, bias len)` per parameterized layer.
    pub param_shapes: Vec<(Vec<usize>, usize)>,
}

impl NetSpec {
    /// Parameter shapes per parameterized layer (weights `[out, in, k, k]` or `[out, in]`).
    pub fn param_shapes(&self) -> Result<Vec<(Vec<usize>, usize)>, NetError> {
        Ok(self.plan()?.param_shapes)
    }

    pub(crate) fn plan(&self) -> Result<Plan, NetError> {
        let [c, h, w] = self.input;
        if c == 0 || h == 0 || w == 0 {
            return Err(NetError::Spec("input dimensions must be positive".into()));
        }
        if self.classes == 0 {
            return Err(NetError::Spec("class count must be positive".into()));
        }
        let mut shape = Shape::Image { c, h, w };
        let mut stages = Vec::new();
        let mut param_shapes = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let bad = |msg: String| NetError::Spec(format!("layer {i} ({layer:?}): {msg}"));
            match *layer {
                Layer::Conv2d { out_channels, kernel, stride, padding } => {
                    let Shape::Image { c, h, w } = shape else {
                        return Err(bad("convolution needs an image input".into()));
                    };
                    if out_channels == 0 || kernel == 0 || stride == 0 {
                        return Err(bad("channels, kernel and stride must be positive".into()));
                    }
                    if h + 2 * padding < kernel || w + 2 * padding < kernel {
                        return Err(bad(format!("kernel {kernel} larger than padded input {h}x{w}")));
                    }
                    let ho = (h + 2 * padding - kernel) / stride + 1;
                    let wo = (w + 2 * padding - kernel) / stride + 1;
                    stages.push(Stage::Conv {
                        cin: c, h, w, cout: out_channels, k: kernel, stride, pad: padding, ho, wo,
                        param: param_shapes.len(),
                    });
                    param_shapes.push((vec![out_channels, c, kernel, kernel], out_channels));
                    shape = Shape::Image { c: out_channels, h: ho, w: wo };
                }
                Layer::Relu => stages.push(Stage::Relu { len: shape.len() }),
                Layer::MaxPool2d { kernel, stride } => {
                    let Shape::Image { c, h, w } = shape else {
                        return Err(bad("pooling needs an image input".into()));
                    };
                    if kernel == 0 || stride == 0 || h < kernel || w < kernel {
                        return Err(bad(format!("window {kernel} does not fit {h}x{w}")));
                    }
                    let ho = (h - kernel) / stride + 1;
                    let wo = (w - kernel) / stride + 1;
                    stages.push(Stage::MaxPool { c, h, w, k: kernel, stride, ho, wo });
                    shape = Shape::Image { c, h: ho, w: wo };
                }
                Layer::Flatten => shape = Shape::Flat(shape.len()),
                Layer::Dense { out_features } => {
                    let Shape::Flat(nin) = shape else {
                        return Err(bad("dense layer needs a flattened input".into()));
                    };
                    if out_features == 0 {
                        return Err(bad("out_features must be positive".into()));
                    }
                    stages.push(Stage::Dense { nin, nout: out_features, param: param_shapes.len() });
                    param_shapes.push((vec![out_features, nin], out_features));
                    shape = Shape::Flat(out_features);
                }
                Layer::Softmax => {
                    if i + 1 != self.layers.len() {
                        return Err(bad("softmax is only allowed as the final layer".into()));
                    }
                }
            }
        }
        match shape {
            Shape::Flat(n) if n == self.classes => {}
            other => {
                return Err(NetError::Spec(format!(
                    "network output {other:?} does not match {} classes",
                    self.classes
                )))
            }
        }
        Ok(Plan { stages, input_len: c * h * w, classes: self.classes, param_shapes })
    }

    /// Small 32×32 classifier used for desk-scale experiments (34,720 parameters at 16 classes).
    pub fn desk_reference(classes: usize) -> Self {
        Self {
            input: [3, 32, 32],
            classes,
            layers: vec![
                Layer::Conv2d { out_channels: 8, kernel: 3, stride: 1, padding: 1 },
                Layer::Relu,
                Layer::MaxPool2d { kernel: 2, stride: 2 },
                Layer::Conv2d { out_channels: 16, kernel: 3, stride: 1, padding: 1 },
                Layer::Relu,
                Layer::MaxPool2d { kernel: 2, stride: 2 },
                Layer::Flatten,
                Layer::Dense { out_features: 32 },
                Layer::Relu,
                Layer::Dense { out_features: classes },
                Layer::Softmax,
            ],
        }
    }

    /// Two convolutions, a pool and a dense head on 16×16×3 input, for gradient checks.
    pub fn grad_check_reference() -> Self {
        Self {
            input: [3, 16, 16],
            classes: 4,
            layers: vec![
                Layer::Conv2d { out_channels: 4, kernel: 3, stride: 1, padding: 1 },
                Layer::Relu,
                Layer::Conv2d { out_channels: 4, kernel: 3, stride: 1, padding: 1 },
                Layer::Relu,
                Layer::MaxPool2d { kernel: 2, stride: 2 },
                Layer::Flatten,
                Layer::Dense { out_features: 4 },
                Layer::Softmax,
            ],
        }
    }

    /// Five parameterized layers on 224×224 input, close to 1.27 M parameters.
    ///
    /// An approximation at the right scale, not a reconstruction of a published layout.
    pub fn edge_scale(classes: usize) -> Self {
        Self {
            input: [3, 224, 224],
            classes,
            layers: vec![
                Layer::Conv2d { out_channels: 16, kernel: 5, stride: 2, padding: 2 },
                Layer::Relu,
                Layer::MaxPool2d { kernel: 2, stride: 2 },
                Layer::Conv2d { out_channels: 32, kernel: 3, stride: 1, padding: 1 },
                Layer::Relu,
                Layer::MaxPool2d { kernel: 2, stride: 2 },
                Layer::Conv2d { out_channels: 32, kernel: 3, stride: 1, padding: 1 },
                Layer::Relu,
                Layer::MaxPool2d { kernel: 2, stride: 2 },
                Layer::Flatten,
                Layer::Dense { out_features: 200 },
                Layer::Relu,
                Layer::Dense { out_features: classes },
                Layer::Softmax,
            ],
        }
    }
}

/// Total weights and biases.
pub fn param_count(spec: &NetSpec) -> Result<usize, NetError> {
    Ok(spec.param_shapes()?.iter().map(|(w, b)| w.iter().product::<usize>() + b).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(n: usize, layers: Vec<Layer>, classes: usize) -> NetSpec {
        NetSpec { input: [n, 1, 1], classes, layers }
    }

    #[test]
    fn count_examples() {
        let dense = flat(5, vec![Layer::Flatten, Layer::Dense { out_features: 10 }], 10);
        assert_eq!(param_count(&dense).unwrap(), 60);
        let none = flat(4, vec![Layer::Relu, Layer::Flatten, Layer::Softmax], 4);
        assert_eq!(param_count(&none).unwrap(), 0);
        let conv = NetSpec {
            input: [3, 4, 4],
            classes: 128,
            layers: vec![Layer::Conv2d { out_channels: 8, kernel: 3, stride: 1, padding: 1 }, Layer::Flatten],
        };
        assert_eq!(param_count(&conv).unwrap(), 224);
    }

    #[test]
    fn reference_counts_are_stable() {
        assert_eq!(param_count(&NetSpec::desk_reference(16)).unwrap(), 34_720);
        assert_eq!(param_count(&NetSpec::grad_check_reference()).unwrap(), 1_288);
        let edge = param_count(&NetSpec::edge_scale(16)).unwrap();
        assert_eq!(edge, 1_272_920);
        assert!((edge as f64 - 1_270_992.0).abs() / 1_270_992.0 < 0.01);
    }

    #[test]
    fn rejects_inconsistent_chains() {
        let no_flatten = flat(5, vec![Layer::Dense { out_features: 3 }], 3);
        assert!(param_count(&no_flatten).is_err());
        let wrong_k = flat(5, vec![Layer::Flatten, Layer::Dense { out_features: 3 }], 4);
        assert!(param_count(&wrong_k).is_err());
        let early_softmax = flat(5, vec![Layer::Softmax, Layer::Flatten], 5);
        assert!(param_count(&early_softmax).is_err());
        let big_kernel = NetSpec {
            input: [1, 2, 2],
            classes: 1,
            layers: vec![Layer::Conv2d { out_channels: 1, kernel: 5, stride: 1, padding: 0 }, Layer::Flatten],
        };
        assert!(param_count(&big_kernel).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let spec = NetSpec::desk_reference(16);
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains(r#""type":"conv2d""#));
        assert_eq!(serde_json::from_str::<NetSpec>(&json).unwrap(), spec);
        let terse = r#"{"input":[1,4,4],"classes":2,"layers":[{"type":"conv2d","out_channels":2,"kernel":3},{"type":"flatten"},{"type":"dense","out_features":2}]}"#;
        let s: NetSpec = serde_json::from_str(terse).unwrap();
        assert_eq!(s.layers[0], Layer::Conv2d { out_channels: 2, kernel: 3, stride: 1, padding: 0 });
    }
}
