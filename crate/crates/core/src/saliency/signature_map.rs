use rayon::prelude::*;

use super::{bilateral_filter, ActivationStack, BilateralParams, SaliencyMap};
use crate::error::Result;
use crate::numeric::{minmax_normalize, resize_bilinear};
use crate::scalar::Scalar;
use crate::spectral::{reconstruct, signature};
use crate::tensor::Tensor;

/// `r ∘ r` where `r` is the inverse DCT of the signature of `x`.
pub fn channel_energy<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let r = reconstruct(&signature(x)?)?;
    r.map(|v| v * v)
}

/// Signature Activation map of one layer's activations.
///
/// Steps: per-channel [`channel_energy`], channel mean, normalize to `[0, 1]`,
/// bilateral filter on the activation grid, bilinear resize to
/// `out_h x out_w`, normalize again.
///
/// Channels are processed in parallel but summed in channel order, so the
/// result does not depend on the thread count.
pub fn signature_activation_map<T: Scalar>(
    acts: &ActivationStack<T>,
    out_h: usize,
    out_w: usize,
    params: &BilateralParams<T>,
) -> Result<SaliencyMap<T>> {
    params.validate()?;
    let energies = (0..acts.channels())
        .into_par_iter()
        .map(|s| channel_energy(&acts.channel(s)))
        .collect::<Result<Vec<_>>>()?;

    let (h, w) = (acts.height(), acts.width());
    let mut acc = vec![T::zero(); h * w];
    for e in &energies {
        for (a, &v) in acc.iter_mut().zip(e.data()) {
            *a += v;
        }
    }
    let inv = T::one() / T::of_usize(acts.channels());
    acc.iter_mut().for_each(|a| *a *= inv);

    let mean = Tensor::from_vec([h, w], acc)?;
    let smoothed = bilateral_filter(&minmax_normalize(&mean), params)?;
    let resized = resize_bilinear(&smoothed, out_h, out_w)?;
    SaliencyMap::new(minmax_normalize(&resized))
}

/// Background suppression for a single grayscale image: the normalized
/// squared reconstruction from its signature, without smoothing.
pub fn suppress_background<T: Scalar>(img: &Tensor<T>) -> Result<Tensor<T>> {
    img.dims2()?;
    Ok(minmax_normalize(&channel_energy(img)?))
}
