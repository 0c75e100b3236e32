//! Forward-only CNN inference for small models.
//!
//! A model is a `model.json` descriptor listing layers in order plus
//! `<layer>.kernel.npy` and `<layer>.bias.npy` for each conv/dense layer.

mod forward;
mod model;
mod randomize;

pub use forward::{conv2d, dense, forward, global_avg_pool, maxpool2, relu, softmax, ForwardTrace};
pub use model::{
    infer_shapes, load_model, parse_descriptor, reference_architecture, reference_model, FeatureShape, LayerKind,
    LayerSpec, LayerWeights, ModelBundle, Padding, DESCRIPTOR_FILE, REFERENCE_TAP,
};
pub use randomize::{cascading_randomize, layer_seed, randomize_layer, FALLBACK_STD};
