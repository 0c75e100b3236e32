//! Signature Activation saliency maps and the tooling around them.
//!
//! The map for a stack of activations `A = [A_1, ..., A_S]` is
//!
//! ```text
//! M = norm(resize(B(norm(mean_s (idct(sign(dct(A_s))))^2))))
//! ```
//!
//! where `B` is a bilateral filter and `norm` is min-max scaling to `[0, 1]`.
//! Besides the map itself the crate carries an Eigen-CAM baseline, a small
//! forward-only CNN used for randomization checks, a box-localization scorer
//! and a Monte-Carlo harness for the sparse-foreground recovery bound.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common `f64` instantiations. File formats are `f64` only.

pub mod error;
pub mod io;
pub mod micronet;
pub mod numeric;
pub mod rng;
pub mod saliency;
pub mod sanity;
pub mod scalar;
pub mod spectral;
pub mod tensor;
pub mod theorem;
pub mod wsol;

pub use error::{Error, Result};
pub use rng::Seed;
pub use scalar::Scalar;
pub use tensor::Tensor;

pub type TensorF64 = Tensor<f64>;
pub type TensorF32 = Tensor<f32>;
pub type ActivationStackF64 = saliency::ActivationStack<f64>;
pub type SaliencyMapF64 = saliency::SaliencyMap<f64>;
pub type SaliencyMapF32 = saliency::SaliencyMap<f32>;
pub type BilateralParamsF64 = saliency::BilateralParams<f64>;
pub type ModelBundleF64 = micronet::ModelBundle<f64>;
pub type SanityRunF64 = sanity::SanityRun<f64>;
pub type WsolRecordF64 = wsol::WsolRecord<f64>;
