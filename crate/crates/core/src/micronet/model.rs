use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_tensor, write_tensor};
use crate::rng::{seeded_rng, Seed};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const DESCRIPTOR_FILE: &str = "model.json";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// Zero padding so that the output has `ceil(size / stride)` positions.
    Same,
    #[default]
    Valid,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Conv2d {
        out_channels: usize,
        kernel: [usize; 2],
        stride: usize,
        padding: Padding,
    },
    Relu,
    MaxPool2,
    GlobalAvgPool,
    Dense {
        out_features: usize,
    },
    Softmax,
}

impl LayerKind {
    pub fn tag(&self) -> &'static str {
        match self {
            LayerKind::Conv2d { .. } => "conv2d",
            LayerKind::Relu => "relu",
            LayerKind::MaxPool2 => "maxpool2",
            LayerKind::GlobalAvgPool => "global_avg_pool",
            LayerKind::Dense { .. } => "dense",
            LayerKind::Softmax => "softmax",
        }
    }

    pub fn is_parametric(&self) -> bool {
        matches!(self, LayerKind::Conv2d { .. } | LayerKind::Dense { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
}

impl LayerSpec {
    pub fn new(name: impl Into<String>, kind: LayerKind) -> Self {
        LayerSpec {
            name: name.into(),
            kind,
        }
    }

    pub fn conv2d(name: &str, out_channels: usize, kernel: usize, padding: Padding) -> Self {
        Self::new(
            name,
            LayerKind::Conv2d {
                out_channels,
                kernel: [kernel, kernel],
                stride: 1,
                padding,
            },
        )
    }

    pub fn dense(name: &str, out_features: usize) -> Self {
        Self::new(name, LayerKind::Dense { out_features })
    }
}

/// Kernel and bias of a parametric layer. Conv kernels are
/// `[out, in, kh, kw]`, dense matrices `[out, in]`; biases are `[out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerWeights<T> {
    pub kernel: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Activation shape flowing between layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureShape {
    Spatial { c: usize, h: usize, w: usize },
    Flat(usize),
}

impl FeatureShape {
    pub fn dims(&self) -> Vec<usize> {
        match *self {
            FeatureShape::Spatial { c, h, w } => vec![c, h, w],
            FeatureShape::Flat(n) => vec![n],
        }
    }

    fn numel(&self) -> usize {
        self.dims().iter().product()
    }
}

/// Output size and leading pad along one axis.
pub(crate) fn conv_geometry(size: usize, k: usize, stride: usize, padding: Padding) -> Option<(usize, usize)> {
    match padding {
        Padding::Valid => (size >= k).then(|| ((size - k) / stride + 1, 0)),
        Padding::Same => {
            let out = size.div_ceil(stride);
            let total = ((out - 1) * stride + k).saturating_sub(size);
            Some((out, total / 2))
        }
    }
}

/// Architecture plus weights. Construction validates that every layer's
/// shapes compose and that each parametric layer has correctly shaped weights.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBundle<T> {
    input: [usize; 3],
    layers: Vec<LayerSpec>,
    weights: BTreeMap<String, LayerWeights<T>>,
    shapes: Vec<FeatureShape>,
}

impl<T: Scalar> ModelBundle<T> {
    pub fn new(
        input: [usize; 3],
        layers: Vec<LayerSpec>,
        weights: BTreeMap<String, LayerWeights<T>>,
    ) -> Result<Self> {
        let shapes = infer_shapes(input, &layers)?;
        let mut prev = FeatureShape::Spatial {
            c: input[0],
            h: input[1],
            w: input[2],
        };
        for (layer, &out) in layers.iter().zip(&shapes) {
            if let Some((kernel, bias)) = expected_weight_shapes(&layer.kind, prev) {
                let wts = weights
                    .get(&layer.name)
                    .ok_or_else(|| Error::MissingWeight(layer.name.clone()))?;
                if wts.kernel.shape() != kernel.as_slice() {
                    return Err(Error::ShapeError(format!(
                        "layer {:?} kernel is {:?}, expected {kernel:?}",
                        layer.name,
                        wts.kernel.shape()
                    )));
                }
                if wts.bias.shape() != bias.as_slice() {
                    return Err(Error::ShapeError(format!(
                        "layer {:?} bias is {:?}, expected {bias:?}",
                        layer.name,
                        wts.bias.shape()
                    )));
                }
            }
            prev = out;
        }
        Ok(ModelBundle {
            input,
            layers,
            weights,
            shapes,
        })
    }

    /// He-normal kernels and `N(0, 0.05^2)` biases, each layer drawn from its
    /// own sub-seed.
    pub fn seeded(input: [usize; 3], layers: Vec<LayerSpec>, seed: Seed) -> Result<Self> {
        let shapes = infer_shapes(input, &layers)?;
        let mut prev = FeatureShape::Spatial {
            c: input[0],
            h: input[1],
            w: input[2],
        };
        let mut weights = BTreeMap::new();
        for (i, (layer, &out)) in layers.iter().zip(&shapes).enumerate() {
            if let Some((kshape, bshape)) = expected_weight_shapes(&layer.kind, prev) {
                let fan_in: usize = kshape[1..].iter().product();
                let std = (2.0 / fan_in as f64).sqrt();
                let mut rng = seeded_rng(seed.derive(i as u64));
                let kernel = (0..kshape.iter().product::<usize>())
                    .map(|_| T::of(rng.normal(0.0, std)))
                    .collect();
                let bias = (0..bshape[0]).map(|_| T::of(rng.normal(0.0, 0.05))).collect();
                weights.insert(
                    layer.name.clone(),
                    LayerWeights {
                        kernel: Tensor::from_vec(kshape, kernel)?,
                        bias: Tensor::from_vec(bshape, bias)?,
                    },
                );
            }
            prev = out;
        }
        Self::new(input, layers, weights)
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.input
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn weights(&self, name: &str) -> Option<&LayerWeights<T>> {
        self.weights.get(name)
    }

    /// Output shape of each layer, in layer order.
    pub fn output_shapes(&self) -> &[FeatureShape] {
        &self.shapes
    }

    pub fn layer_index(&self, name: &str) -> Result<usize> {
        self.layers
            .iter()
            .position(|l| l.name == name)
            .ok_or_else(|| Error::UnknownLayer(name.to_string()))
    }

    /// Indices of layers that carry weights, input to output.
    pub fn parametric_layers(&self) -> Vec<usize> {
        (0..self.layers.len())
            .filter(|&i| self.layers[i].kind.is_parametric())
            .collect()
    }

    /// Copy of the bundle with one layer's weights replaced.
    pub(crate) fn with_weights(&self, name: &str, w: LayerWeights<T>) -> Result<Self> {
        let mut weights = self.weights.clone();
        weights.insert(name.to_string(), w);
        Self::new(self.input, self.layers.clone(), weights)
    }

    pub fn cast<U: Scalar>(&self) -> Result<ModelBundle<U>> {
        let weights = self
            .weights
            .iter()
            .map(|(k, w)| {
                Ok((
                    k.clone(),
                    LayerWeights {
                        kernel: w.kernel.cast()?,
                        bias: w.bias.cast()?,
                    },
                ))
            })
            .collect::<Result<_>>()?;
        ModelBundle::new(self.input, self.layers.clone(), weights)
    }

    pub fn descriptor_json(&self) -> String {
        let desc = Descriptor {
            input: self.input.to_vec(),
            layers: self.layers.iter().map(RawLayer::from).collect(),
        };
        serde_json::to_string_pretty(&desc).expect("descriptor serializes")
    }

    /// Writes `model.json` and `<name>.kernel.npy` / `<name>.bias.npy` files.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(DESCRIPTOR_FILE);
        fs::write(&path, self.descriptor_json() + "\n").map_err(|e| Error::io(&path, e))?;
        for (name, w) in &self.weights {
            write_tensor(&w.kernel.cast()?, dir.join(format!("{name}.kernel.npy")))?;
            write_tensor(&w.bias.cast()?, dir.join(format!("{name}.bias.npy")))?;
        }
        Ok(())
    }
}

fn expected_weight_shapes(kind: &LayerKind, input: FeatureShape) -> Option<(Vec<usize>, Vec<usize>)> {
    match (kind, input) {
        (
            LayerKind::Conv2d {
                out_channels,
                kernel: [kh, kw],
                ..
            },
            FeatureShape::Spatial { c, .. },
        ) => Some((vec![*out_channels, c, *kh, *kw], vec![*out_channels])),
        (LayerKind::Dense { out_features }, s) => Some((vec![*out_features, s.numel()], vec![*out_features])),
        _ => None,
    }
}

/// Output shape of every layer, checking attributes and composition.
pub fn infer_shapes(input: [usize; 3], layers: &[LayerSpec]) -> Result<Vec<FeatureShape>> {
    if input.contains(&0) {
        return Err(Error::ShapeError(format!("input shape {input:?} has a zero dimension")));
    }
    let mut seen = HashSet::new();
    let mut cur = FeatureShape::Spatial {
        c: input[0],
        h: input[1],
        w: input[2],
    };
    let mut out = Vec::with_capacity(layers.len());
    for layer in layers {
        if layer.name.is_empty() {
            return Err(Error::ShapeError("layer with empty name".into()));
        }
        if !seen.insert(layer.name.as_str()) {
            return Err(Error::ShapeError(format!("duplicate layer name {:?}", layer.name)));
        }
        let bad = |msg: String| Error::ShapeError(format!("layer {:?}: {msg}", layer.name));
        cur = match (&layer.kind, cur) {
            (
                LayerKind::Conv2d {
                    out_channels,
                    kernel: [kh, kw],
                    stride,
                    padding,
                },
                FeatureShape::Spatial { h, w, .. },
            ) => {
                if *out_channels == 0 || *kh == 0 || *kw == 0 || *stride == 0 {
                    return Err(bad("conv attributes must be positive".into()));
                }
                let (oh, _) = conv_geometry(h, *kh, *stride, *padding)
                    .ok_or_else(|| bad(format!("kernel {kh}x{kw} larger than input {h}x{w}")))?;
                let (ow, _) = conv_geometry(w, *kw, *stride, *padding)
                    .ok_or_else(|| bad(format!("kernel {kh}x{kw} larger than input {h}x{w}")))?;
                FeatureShape::Spatial {
                    c: *out_channels,
                    h: oh,
                    w: ow,
                }
            }
            (LayerKind::Relu, s) => s,
            (LayerKind::MaxPool2, FeatureShape::Spatial { c, h, w }) => {
                if h < 2 || w < 2 {
                    return Err(bad(format!("cannot 2x2-pool a {h}x{w} grid")));
                }
                FeatureShape::Spatial { c, h: h / 2, w: w / 2 }
            }
            (LayerKind::GlobalAvgPool, FeatureShape::Spatial { c, .. }) => FeatureShape::Flat(c),
            (LayerKind::Dense { out_features }, _) => {
                if *out_features == 0 {
                    return Err(bad("out_features must be positive".into()));
                }
                FeatureShape::Flat(*out_features)
            }
            (LayerKind::Softmax, FeatureShape::Flat(n)) => FeatureShape::Flat(n),
            (kind, s) => {
                return Err(bad(format!("{} cannot follow output shape {:?}", kind.tag(), s.dims())));
            }
        };
        out.push(cur);
    }
    Ok(out)
}

/// The architecture shipped for tests and demos: 1x32x32 input, two
/// conv/relu/pool blocks (8 and 16 channels), global average pooling and a
/// two-way dense head.
pub fn reference_architecture() -> ([usize; 3], Vec<LayerSpec>) {
    let layers = vec![
        LayerSpec::conv2d("conv1", 8, 3, Padding::Same),
        LayerSpec::new("relu1", LayerKind::Relu),
        LayerSpec::new("pool1", LayerKind::MaxPool2),
        LayerSpec::conv2d("conv2", 16, 3, Padding::Same),
        LayerSpec::new("relu2", LayerKind::Relu),
        LayerSpec::new("pool2", LayerKind::MaxPool2),
        LayerSpec::new("gap", LayerKind::GlobalAvgPool),
        LayerSpec::dense("fc", 2),
        LayerSpec::new("softmax", LayerKind::Softmax),
    ];
    ([1, 32, 32], layers)
}

/// Layer whose output feeds saliency maps on the reference architecture.
pub const REFERENCE_TAP: &str = "conv2";

pub fn reference_model<T: Scalar>(seed: Seed) -> Result<ModelBundle<T>> {
    let (input, layers) = reference_architecture();
    ModelBundle::seeded(input, layers, seed)
}

#[derive(Serialize, Deserialize)]
struct Descriptor {
    input: Vec<usize>,
    layers: Vec<RawLayer>,
}

#[derive(Serialize, Deserialize)]
struct RawLayer {
    name: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    out_channels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kernel: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    padding: Option<Padding>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    out_features: Option<usize>,
}

impl From<&LayerSpec> for RawLayer {
    fn from(l: &LayerSpec) -> Self {
        let mut raw = RawLayer {
            name: l.name.clone(),
            kind: l.kind.tag().to_string(),
            out_channels: None,
            kernel: None,
            stride: None,
            padding: None,
            out_features: None,
        };
        match l.kind {
            LayerKind::Conv2d {
                out_channels,
                kernel,
                stride,
                padding,
            } => {
                raw.out_channels = Some(out_channels);
                raw.kernel = Some(kernel);
                raw.stride = Some(stride);
                raw.padding = Some(padding);
            }
            LayerKind::Dense { out_features } => raw.out_features = Some(out_features),
            _ => {}
        }
        raw
    }
}

impl RawLayer {
    fn into_spec(self) -> Result<LayerSpec> {
        let missing = |attr: &str| Error::ShapeError(format!("layer {:?} is missing {attr:?}", self.name));
        let kind = match self.kind.as_str() {
            "conv2d" => LayerKind::Conv2d {
                out_channels: self.out_channels.ok_or_else(|| missing("out_channels"))?,
                kernel: self.kernel.ok_or_else(|| missing("kernel"))?,
                stride: self.stride.unwrap_or(1),
                padding: self.padding.unwrap_or_default(),
            },
            "relu" => LayerKind::Relu,
            "maxpool2" => LayerKind::MaxPool2,
            "global_avg_pool" => LayerKind::GlobalAvgPool,
            "dense" => LayerKind::Dense {
                out_features: self.out_features.ok_or_else(|| missing("out_features"))?,
            },
            "softmax" => LayerKind::Softmax,
            other => return Err(Error::UnknownLayer(format!("{:?} has kind {other:?}", self.name))),
        };
        Ok(LayerSpec::new(self.name, kind))
    }
}

/// Parses a `model.json` descriptor.
pub fn parse_descriptor(text: &str) -> Result<([usize; 3], Vec<LayerSpec>)> {
    let desc: Descriptor = serde_json::from_str(text).map_err(|e| Error::json(DESCRIPTOR_FILE, e))?;
    let input: [usize; 3] = desc
        .input
        .as_slice()
        .try_into()
        .map_err(|_| Error::ShapeError(format!("input must be [c, h, w], got {:?}", desc.input)))?;
    let layers = desc
        .layers
        .into_iter()
        .map(RawLayer::into_spec)
        .collect::<Result<Vec<_>>>()?;
    Ok((input, layers))
}

/// Loads `model.json` plus one `.npy` per weight tensor from `dir`.
pub fn load_model(dir: impl AsRef<Path>) -> Result<ModelBundle<f64>> {
    let dir = dir.as_ref();
    let path = dir.join(DESCRIPTOR_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let (input, layers) = parse_descriptor(&text)?;
    // structural problems are reported before any weight file is touched
    infer_shapes(input, &layers)?;

    let mut weights = BTreeMap::new();
    for layer in layers.iter().filter(|l| l.kind.is_parametric()) {
        let load = |part: &str| {
            let p = dir.join(format!("{}.{part}.npy", layer.name));
            if !p.is_file() {
                return Err(Error::MissingWeight(format!("{} ({})", layer.name, p.display())));
            }
            read_tensor(&p)
        };
        weights.insert(
            layer.name.clone(),
            LayerWeights {
                kernel: load("kernel")?,
                bias: load("bias")?,
            },
        );
    }
    ModelBundle::new(input, layers, weights)
}
