use super::SaliencyMap;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Piecewise-linear jet colormap: dark blue at 0, through cyan, yellow, to
/// dark red at 1.
pub fn jet<T: Scalar>(v: T) -> [T; 3] {
    let v = v.max(T::zero()).min(T::one());
    let four = T::of(4.0);
    let ramp = |center: f64| (T::of(1.5) - (four * v - T::of(center)).abs()).max(T::zero()).min(T::one());
    [ramp(3.0), ramp(2.0), ramp(1.0)]
}

/// Blends a jet-colored map over a grayscale image:
/// `alpha * jet(map) + (1 - alpha) * gray`. Returns `[height, width, 3]`.
pub fn render_overlay<T: Scalar>(img: &Tensor<T>, map: &SaliencyMap<T>, alpha: T) -> Result<Tensor<T>> {
    let (h, w) = img.dims2()?;
    if (map.height(), map.width()) != (h, w) {
        return Err(Error::InvalidShape(format!(
            "map is {}x{}, image is {h}x{w}",
            map.height(),
            map.width()
        )));
    }
    if !(alpha >= T::zero() && alpha <= T::one()) {
        return Err(Error::InvalidParameter(format!("alpha {alpha} outside [0, 1]")));
    }
    let beta = T::one() - alpha;
    let mut out = Vec::with_capacity(h * w * 3);
    for (&g, &m) in img.data().iter().zip(map.values().data()) {
        let g = g.max(T::zero()).min(T::one());
        for c in jet(m) {
            out.push((alpha * c + beta * g).max(T::zero()).min(T::one()));
        }
    }
    Ok(Tensor::from_parts(vec![h, w, 3], out))
}
