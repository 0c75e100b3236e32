use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Bilateral filter settings. Defaults: `sigma_spatial = 3` px,
/// `sigma_range = 0.1` (for maps normalized to `[0, 1]`), `radius = 6` px.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BilateralParams<T> {
    pub sigma_spatial: T,
    pub sigma_range: T,
    pub radius: usize,
}

impl<T: Scalar> Default for BilateralParams<T> {
    fn default() -> Self {
        BilateralParams {
            sigma_spatial: T::of(3.0),
            sigma_range: T::of(0.1),
            radius: 6,
        }
    }
}

impl<T: Scalar> BilateralParams<T> {
    pub fn new(sigma_spatial: T, sigma_range: T, radius: usize) -> Result<Self> {
        let p = BilateralParams {
            sigma_spatial,
            sigma_range,
            radius,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_spatial > T::zero() && self.sigma_spatial.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma_spatial must be positive, got {}",
                self.sigma_spatial
            )));
        }
        if !(self.sigma_range > T::zero() && self.sigma_range.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma_range must be positive, got {}",
                self.sigma_range
            )));
        }
        if self.radius == 0 {
            return Err(Error::InvalidParameter("radius must be at least 1".into()));
        }
        Ok(())
    }
}

/// Edge-preserving smoothing: each output pixel is the average of its
/// `(2r+1)^2` window (clipped at the borders) weighted by
/// `exp(-|p-q|^2 / 2 sigma_s^2) * exp(-(I(p)-I(q))^2 / 2 sigma_r^2)`.
pub fn bilateral_filter<T: Scalar>(map: &Tensor<T>, p: &BilateralParams<T>) -> Result<Tensor<T>> {
    p.validate()?;
    let (h, w) = map.dims2()?;
    let r = p.radius as isize;
    let side = 2 * p.radius + 1;
    let half = T::of(-0.5);
    let inv_s2 = T::one() / (p.sigma_spatial * p.sigma_spatial);
    let inv_r2 = T::one() / (p.sigma_range * p.sigma_range);

    let mut spatial = Vec::with_capacity(side * side);
    for dy in -r..=r {
        for dx in -r..=r {
            let d2 = T::of((dy * dy + dx * dx) as f64);
            spatial.push((half * d2 * inv_s2).exp());
        }
    }

    let src = map.data();
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let center = src[(y as usize) * w + x as usize];
            let (mut num, mut den) = (T::zero(), T::zero());
            let (mut lo, mut hi) = (center, center);
            for qy in (y - r).max(0)..=(y + r).min(h as isize - 1) {
                let row = &src[(qy as usize) * w..(qy as usize + 1) * w];
                let srow = ((qy - y + r) as usize) * side;
                for qx in (x - r).max(0)..=(x + r).min(w as isize - 1) {
                    let v = row[qx as usize];
                    let diff = v - center;
                    let wt = spatial[srow + (qx - x + r) as usize] * (half * diff * diff * inv_r2).exp();
                    num += wt * v;
                    den += wt;
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            // den >= 1: the center pixel has weight exp(0) * exp(0)
            out.push((num / den).max(lo).min(hi));
        }
    }
    Ok(Tensor::from_parts(vec![h, w], out))
}
