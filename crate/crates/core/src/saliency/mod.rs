//! Saliency maps from convolutional activations.
//!
//! [`signature_activation_map`] is the gradient-free map built from per-channel
//! image signatures. [`eigen_cam_map`] is the principal-component baseline.

mod bilateral;
mod eigen_cam;
mod overlay;
mod signature_map;

pub use bilateral::{bilateral_filter, BilateralParams};
pub use eigen_cam::{eigen_cam_map, principal_direction, POWER_MAX_ITERS, POWER_TOL};
pub use overlay::{jet, render_overlay};
pub use signature_map::{channel_energy, signature_activation_map, suppress_background};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// One layer's activations laid out as `[channels, height, width]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationStack<T> {
    values: Tensor<T>,
}

impl<T: Scalar> ActivationStack<T> {
    /// Accepts `[c, h, w]`, or `[h, w]` as a single channel.
    pub fn new(values: Tensor<T>) -> Result<Self> {
        match values.rank() {
            3 => Ok(ActivationStack { values }),
            2 => {
                let (h, w) = values.dims2()?;
                Ok(ActivationStack {
                    values: values.reshape([1, h, w])?,
                })
            }
            _ => Err(Error::InvalidShape(format!(
                "activation stack must be [channels, height, width], got {:?}",
                values.shape()
            ))),
        }
    }

    pub fn channels(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn height(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.values.shape()[2]
    }

    pub fn values(&self) -> &Tensor<T> {
        &self.values
    }

    /// Channel `s` as a `[h, w]` tensor.
    pub fn channel(&self, s: usize) -> Tensor<T> {
        self.values.channel(s).expect("index checked by caller")
    }
}

/// A rank-2 map with every value in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SaliencyMap<T> {
    values: Tensor<T>,
}

impl<T: Scalar> SaliencyMap<T> {
    pub fn new(values: Tensor<T>) -> Result<Self> {
        values.dims2()?;
        if let Some(v) = values
            .data()
            .iter()
            .find(|&&v| v < T::zero() || v > T::one())
        {
            return Err(Error::OutOfRange(format!("saliency value {v}")));
        }
        Ok(SaliencyMap { values })
    }

    pub fn height(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn values(&self) -> &Tensor<T> {
        &self.values
    }

    pub fn into_values(self) -> Tensor<T> {
        self.values
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> T {
        self.values.at2(r, c)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SaliencyMethod {
    #[default]
    Signature,
    Eigen,
}

/// Computes a map with either method at the requested output size.
pub fn saliency_map<T: Scalar>(
    method: SaliencyMethod,
    acts: &ActivationStack<T>,
    out_h: usize,
    out_w: usize,
    params: &BilateralParams<T>,
) -> Result<SaliencyMap<T>> {
    match method {
        SaliencyMethod::Signature => signature_activation_map(acts, out_h, out_w, params),
        SaliencyMethod::Eigen => eigen_cam_map(acts, out_h, out_w),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stack_accepts_single_plane() {
        let s = ActivationStack::new(Tensor::<f64>::zeros([3, 4]).unwrap()).unwrap();
        assert_eq!((s.channels(), s.height(), s.width()), (1, 3, 4));
        assert!(ActivationStack::new(Tensor::<f64>::zeros([3]).unwrap()).is_err());
    }

    #[test]
    fn map_range_is_checked() {
        assert!(SaliencyMap::new(Tensor::full([2, 2], 0.5).unwrap()).is_ok());
        assert!(matches!(
            SaliencyMap::new(Tensor::full([2, 2], 1.5).unwrap()),
            Err(Error::OutOfRange(_))
        ));
        assert!(SaliencyMap::new(Tensor::full([4], 0.5).unwrap()).is_err());
    }
}
