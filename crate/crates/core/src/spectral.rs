//! Orthonormal DCT-II and its inverse (DCT-III) in one and two dimensions,
//! the sign operator, and the image signature with its reconstruction.
//!
//! Forward transform of a length-`N` signal:
//!
//! ```text
//! X[k] = s(k) * sum_n x[n] * cos(pi * (2n + 1) * k / (2N))
//! s(0) = sqrt(1/N),  s(k) = sqrt(2/N) for k > 0
//! ```
//!
//! Short lengths use a precomputed cosine table. Longer ones go through an
//! `N`-point complex FFT of the even/odd reordered input (Makhoul's
//! algorithm). Both paths agree with the textbook sum to ~1e-13.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlannerScalar};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Lengths up to this use the O(N^2) cosine table.
const DIRECT_MAX_LEN: usize = 32;

/// Coefficients whose magnitude is below `SIGN_FLOOR_ULPS * eps * |x|_2` are
/// treated as exact zeros by [`signature`]. Transform rounding leaves residue
/// of roughly `eps * |x|_2` where the exact coefficient vanishes (e.g. every
/// non-DC coefficient of a constant signal).
pub const SIGN_FLOOR_ULPS: f64 = 64.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Basis {
    Spatial,
    Dct,
}

impl Basis {
    fn name(self) -> &'static str {
        match self {
            Basis::Spatial => "spatial",
            Basis::Dct => "dct",
        }
    }
}

/// A tensor tagged with the basis its entries are expressed in.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralTensor<T> {
    pub coefficients: Tensor<T>,
    pub basis: Basis,
}

impl<T: Scalar> SpectralTensor<T> {
    pub fn new(coefficients: Tensor<T>, basis: Basis) -> Self {
        SpectralTensor {
            coefficients,
            basis,
        }
    }

    fn expect_dct(&self) -> Result<&Tensor<T>> {
        match self.basis {
            Basis::Dct => Ok(&self.coefficients),
            other => Err(Error::InvalidBasis {
                expected: Basis::Dct.name(),
                found: other.name(),
            }),
        }
    }
}

/// Sign pattern of DCT coefficients, entries in `{-1, 0, +1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SignatureTensor<T> {
    signs: Tensor<T>,
}

impl<T: Scalar> SignatureTensor<T> {
    pub fn from_signs(signs: Tensor<T>) -> Result<Self> {
        let ok = signs
            .data()
            .iter()
            .all(|&v| v == T::one() || v == -T::one() || v == T::zero());
        if !ok {
            return Err(Error::InvalidParameter(
                "signature entries must be -1, 0 or +1".into(),
            ));
        }
        Ok(SignatureTensor { signs })
    }

    pub fn signs(&self) -> &Tensor<T> {
        &self.signs
    }

    pub fn into_signs(self) -> Tensor<T> {
        self.signs
    }
}

enum Kernel<T: Scalar> {
    /// `table[k * n + i] = cos(pi * (2i + 1) * k / 2n)`
    Direct(Vec<T>),
    Fft {
        forward: Arc<dyn Fft<T>>,
        inverse: Arc<dyn Fft<T>>,
        /// `exp(-i * pi * k / 2n)`
        twiddle: Vec<Complex<T>>,
    },
}

/// Precomputed 1D transform of a fixed length. Reuse one plan when
/// transforming many signals of the same length.
pub struct DctPlan<T: Scalar> {
    len: usize,
    dc_scale: T,
    ac_scale: T,
    kernel: Kernel<T>,
}

impl<T: Scalar> DctPlan<T> {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::InvalidShape("DCT of an empty signal".into()));
        }
        let n = T::of_usize(len);
        let pi = T::PI();
        let two = T::of(2.0);
        let kernel = if len <= DIRECT_MAX_LEN {
            let mut table = Vec::with_capacity(len * len);
            for k in 0..len {
                for i in 0..len {
                    let phase = pi * T::of_usize((2 * i + 1) * k) / (two * n);
                    table.push(phase.cos());
                }
            }
            Kernel::Direct(table)
        } else {
            // scalar planner: results do not depend on detected SIMD features
            let mut planner = FftPlannerScalar::new();
            let twiddle = (0..len)
                .map(|k| {
                    let phase = -pi * T::of_usize(k) / (two * n);
                    Complex::new(phase.cos(), phase.sin())
                })
                .collect();
            Kernel::Fft {
                forward: planner.plan_fft_forward(len),
                inverse: planner.plan_fft_inverse(len),
                twiddle,
            }
        };
        Ok(DctPlan {
            len,
            dc_scale: (T::one() / n).sqrt(),
            ac_scale: (two / n).sqrt(),
            kernel,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    fn scale(&self, k: usize) -> T {
        if k == 0 {
            self.dc_scale
        } else {
            self.ac_scale
        }
    }

    /// Orthonormal DCT-II of `input` into `output`.
    pub fn forward(&self, input: &[T], output: &mut [T]) {
        let n = self.len;
        assert!(input.len() == n && output.len() == n, "length mismatch");
        match &self.kernel {
            Kernel::Direct(table) => {
                for (k, out) in output.iter_mut().enumerate() {
                    let row = &table[k * n..(k + 1) * n];
                    let acc: T = row.iter().zip(input).map(|(&c, &x)| c * x).sum();
                    *out = self.scale(k) * acc;
                }
            }
            Kernel::Fft {
                forward, twiddle, ..
            } => {
                let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
                for (i, &x) in input.iter().enumerate() {
                    let slot = if i % 2 == 0 { i / 2 } else { n - 1 - i / 2 };
                    buf[slot].re = x;
                }
                forward.process(&mut buf);
                for (k, out) in output.iter_mut().enumerate() {
                    *out = self.scale(k) * (buf[k] * twiddle[k]).re;
                }
            }
        }
    }

    /// Orthonormal DCT-III (the inverse of [`forward`](Self::forward)).
    pub fn inverse(&self, input: &[T], output: &mut [T]) {
        let n = self.len;
        assert!(input.len() == n && output.len() == n, "length mismatch");
        match &self.kernel {
            Kernel::Direct(table) => {
                output.iter_mut().for_each(|o| *o = T::zero());
                for (k, &coef) in input.iter().enumerate() {
                    let c = self.scale(k) * coef;
                    let row = &table[k * n..(k + 1) * n];
                    for (o, &t) in output.iter_mut().zip(row) {
                        *o += c * t;
                    }
                }
            }
            Kernel::Fft {
                inverse, twiddle, ..
            } => {
                // unscaled DCT-II values Y[k]; W[k] = Y[k] - i Y[N-k], V[k] = conj(tw[k]) W[k]
                let y: Vec<T> = input
                    .iter()
                    .enumerate()
                    .map(|(k, &c)| c / self.scale(k))
                    .collect();
                let mut buf: Vec<Complex<T>> = (0..n)
                    .map(|k| {
                        let im = if k == 0 { T::zero() } else { -y[n - k] };
                        Complex::new(y[k], im) * twiddle[k].conj()
                    })
                    .collect();
                inverse.process(&mut buf);
                let inv_n = T::one() / T::of_usize(n);
                for (i, out) in output.iter_mut().enumerate() {
                    let slot = if i % 2 == 0 { i / 2 } else { n - 1 - i / 2 };
                    *out = buf[slot].re * inv_n;
                }
            }
        }
    }
}

fn transform1<T: Scalar>(x: &Tensor<T>, inverse: bool) -> Result<Tensor<T>> {
    if x.rank() != 1 {
        return Err(Error::InvalidShape(format!(
            "1D transform needs rank 1, got {:?}",
            x.shape()
        )));
    }
    let plan = DctPlan::new(x.len())?;
    let mut out = vec![T::zero(); x.len()];
    if inverse {
        plan.inverse(x.data(), &mut out);
    } else {
        plan.forward(x.data(), &mut out);
    }
    Ok(Tensor::from_parts(x.shape().to_vec(), out))
}

/// Separable 2D transform: forward does rows then columns, inverse does
/// columns then rows.
fn transform2<T: Scalar>(x: &Tensor<T>, inverse: bool) -> Result<Tensor<T>> {
    let (h, w) = x.dims2()?;
    let row_plan = DctPlan::new(w)?;
    let col_plan = DctPlan::new(h)?;
    let mut data = x.data().to_vec();

    let rows = |data: &mut Vec<T>| {
        let mut out = vec![T::zero(); w];
        for r in 0..h {
            let row = &mut data[r * w..(r + 1) * w];
            if inverse {
                row_plan.inverse(row, &mut out);
            } else {
                row_plan.forward(row, &mut out);
            }
            row.copy_from_slice(&out);
        }
    };
    let cols = |data: &mut Vec<T>| {
        let mut col = vec![T::zero(); h];
        let mut out = vec![T::zero(); h];
        for c in 0..w {
            for r in 0..h {
                col[r] = data[r * w + c];
            }
            if inverse {
                col_plan.inverse(&col, &mut out);
            } else {
                col_plan.forward(&col, &mut out);
            }
            for r in 0..h {
                data[r * w + c] = out[r];
            }
        }
    };

    if inverse {
        cols(&mut data);
        rows(&mut data);
    } else {
        rows(&mut data);
        cols(&mut data);
    }
    Ok(Tensor::from_parts(vec![h, w], data))
}

pub fn dct1<T: Scalar>(x: &Tensor<T>) -> Result<SpectralTensor<T>> {
    Ok(SpectralTensor::new(transform1(x, false)?, Basis::Dct))
}

pub fn idct1<T: Scalar>(x: &SpectralTensor<T>) -> Result<Tensor<T>> {
    transform1(x.expect_dct()?, true)
}

pub fn dct2<T: Scalar>(x: &Tensor<T>) -> Result<SpectralTensor<T>> {
    Ok(SpectralTensor::new(transform2(x, false)?, Basis::Dct))
}

pub fn idct2<T: Scalar>(x: &SpectralTensor<T>) -> Result<Tensor<T>> {
    transform2(x.expect_dct()?, true)
}

/// Forward transform matching the rank of `x` (1 or 2).
pub fn dct<T: Scalar>(x: &Tensor<T>) -> Result<SpectralTensor<T>> {
    match x.rank() {
        1 => dct1(x),
        2 => dct2(x),
        r => Err(Error::InvalidShape(format!("DCT of a rank-{r} tensor"))),
    }
}

/// Inverse transform matching the rank of the coefficients (1 or 2).
pub fn idct<T: Scalar>(x: &SpectralTensor<T>) -> Result<Tensor<T>> {
    match x.coefficients.rank() {
        1 => idct1(x),
        2 => idct2(x),
        r => Err(Error::InvalidShape(format!("IDCT of a rank-{r} tensor"))),
    }
}

/// `sign(v)` with `sign(0) = 0`, after flushing `|v| <= floor` to zero.
#[inline]
pub fn sign_with_floor<T: Scalar>(v: T, floor: T) -> T {
    if v.abs() <= floor {
        T::zero()
    } else if v > T::zero() {
        T::one()
    } else {
        -T::one()
    }
}

/// Magnitude under which a coefficient of the transform of `x` counts as zero.
pub fn sign_floor<T: Scalar>(x: &Tensor<T>) -> T {
    T::of(SIGN_FLOOR_ULPS) * T::epsilon() * x.norm_l2()
}

/// Image signature: the sign of every orthonormal DCT coefficient.
pub fn signature<T: Scalar>(x: &Tensor<T>) -> Result<SignatureTensor<T>> {
    let coefs = dct(x)?.coefficients;
    let floor = sign_floor(x);
    let signs = coefs.data().iter().map(|&v| sign_with_floor(v, floor)).collect();
    Ok(SignatureTensor {
        signs: Tensor::from_parts(coefs.shape().to_vec(), signs),
    })
}

/// Inverse DCT of a sign pattern.
pub fn reconstruct<T: Scalar>(sig: &SignatureTensor<T>) -> Result<Tensor<T>> {
    idct(&SpectralTensor::new(sig.signs.clone(), Basis::Dct))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded_rng, Seed};
    use proptest::prelude::*;

    fn naive_dct(x: &[f64]) -> Vec<f64> {
        let n = x.len() as f64;
        (0..x.len())
            .map(|k| {
                let s = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
                s * x
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        v * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2.0 * n)).cos()
                    })
                    .sum::<f64>()
            })
            .collect()
    }

    fn random(len: usize, seed: u64) -> Vec<f64> {
        let mut r = seeded_rng(Seed(seed));
        (0..len).map(|_| r.uniform_range(-1.0, 1.0)).collect()
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn ones_is_dc_only() {
        let x = Tensor::full([4], 1.0f64).unwrap();
        let c = dct1(&x).unwrap().coefficients;
        assert!((c.data()[0] - 2.0).abs() < 1e-15);
        assert!(c.data()[1..].iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn impulse_length_two() {
        let x = Tensor::from_vec([2], vec![1.0, 0.0]).unwrap();
        let c = dct1(&x).unwrap().coefficients;
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(max_diff(c.data(), &[h, h]) < 1e-15);
    }

    #[test]
    fn both_paths_match_naive_sum() {
        for len in [1, 2, 3, 7, 16, 31, 32, 33, 48, 63, 64, 100, 127, 255, 256] {
            let x = random(len, len as u64);
            let plan = DctPlan::new(len).unwrap();
            let mut out = vec![0.0; len];
            plan.forward(&x, &mut out);
            let expect = naive_dct(&x);
            assert!(max_diff(&out, &expect) < 1e-12, "len {len}");
            let mut back = vec![0.0; len];
            plan.inverse(&out, &mut back);
            assert!(max_diff(&back, &x) < 1e-12, "len {len}");
        }
    }

    #[test]
    fn dc_coefficient_inverts_to_constant() {
        for len in [4, 64] {
            let mut v = vec![0.0; len];
            v[0] = 3.0;
            let s = SpectralTensor::new(Tensor::from_vec([len], v).unwrap(), Basis::Dct);
            let x = idct1(&s).unwrap();
            let want = 3.0 / (len as f64).sqrt();
            assert!(x.data().iter().all(|v| (v - want).abs() < 1e-14), "len {len}");
        }
    }

    #[test]
    fn spatial_basis_is_rejected() {
        let s = SpectralTensor::new(Tensor::full([4], 1.0).unwrap(), Basis::Spatial);
        assert!(matches!(idct1(&s), Err(Error::InvalidBasis { .. })));
    }

    #[test]
    fn empty_and_wrong_rank() {
        assert!(DctPlan::<f64>::new(0).is_err());
        let m = Tensor::<f64>::zeros([2, 2]).unwrap();
        assert!(dct1(&m).is_err());
        assert!(dct2(&Tensor::<f64>::zeros([4]).unwrap()).is_err());
    }

    #[test]
    fn two_d_ones() {
        let x = Tensor::full([4, 4], 1.0f64).unwrap();
        let c = dct2(&x).unwrap().coefficients;
        assert!((c.data()[0] - 4.0).abs() < 1e-14);
        assert!(c.data()[1..].iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn signature_examples() {
        let x = Tensor::full([4, 4], 1.0).unwrap();
        let s = signature(&x).unwrap();
        let mut want = vec![0.0; 16];
        want[0] = 1.0;
        assert_eq!(s.signs().data(), want.as_slice());

        let x = Tensor::from_vec([3, 5], random(15, 4)).unwrap();
        let base = signature(&x).unwrap();
        assert_eq!(signature(&x.scale(3.7).unwrap()).unwrap(), base);
        let neg = signature(&x.scale(-1.0).unwrap()).unwrap();
        assert_eq!(neg.signs(), &base.signs().scale(-1.0).unwrap());
    }

    #[test]
    fn constant_signals_of_any_size_have_dc_only_signature() {
        for (h, w) in [(1, 50), (7, 7), (33, 40), (64, 64), (1, 1024), (300, 512)] {
            let x = Tensor::full([h, w], 0.37).unwrap();
            let s = signature(&x).unwrap();
            assert_eq!(s.signs().data()[0], 1.0);
            assert!(s.signs().data()[1..].iter().all(|&v| v == 0.0), "{h}x{w}");

            let s = signature(&x.cast::<f32>().unwrap()).unwrap();
            assert!(s.signs().data()[1..].iter().all(|&v| v == 0.0), "f32 {h}x{w}");
        }
    }

    #[test]
    fn reconstruct_examples() {
        let zero = SignatureTensor::from_signs(Tensor::<f64>::zeros([3, 3]).unwrap()).unwrap();
        assert!(reconstruct(&zero).unwrap().data().iter().all(|&v| v == 0.0));

        let dc = SignatureTensor::from_signs(Tensor::from_vec([4], vec![1.0, 0.0, 0.0, 0.0]).unwrap())
            .unwrap();
        assert_eq!(reconstruct(&dc).unwrap().data(), &[0.5; 4]);
        assert!(SignatureTensor::from_signs(Tensor::full([2], 0.5).unwrap()).is_err());
    }

    #[test]
    fn f32_path_agrees_with_f64() {
        let x = random(64, 8);
        let x64 = Tensor::from_vec([8, 8], x).unwrap();
        let x32: Tensor<f32> = x64.cast().unwrap();
        let c64 = dct2(&x64).unwrap().coefficients;
        let c32: Tensor<f64> = dct2(&x32).unwrap().coefficients.cast().unwrap();
        assert!(c64.max_abs_diff(&c32).unwrap() < 1e-5);
    }

    proptest! {
        #[test]
        fn linearity(v in prop::collection::vec(-10.0f64..10.0, 40), u in prop::collection::vec(-10.0f64..10.0, 40),
                     a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let x = Tensor::from_vec([5, 8], v).unwrap();
            let y = Tensor::from_vec([5, 8], u).unwrap();
            let mix = Tensor::from_vec([5, 8], x.data().iter().zip(y.data()).map(|(p, q)| a * p + b * q).collect()).unwrap();
            let (cx, cy, cm) = (dct2(&x).unwrap().coefficients, dct2(&y).unwrap().coefficients, dct2(&mix).unwrap().coefficients);
            for i in 0..40 {
                prop_assert!((cm.data()[i] - (a * cx.data()[i] + b * cy.data()[i])).abs() < 1e-10);
            }
        }

        #[test]
        fn positive_scaling_keeps_signature(v in prop::collection::vec(-1.0f64..1.0, 36), alpha in 1e-3f64..1e3) {
            let x = Tensor::from_vec([6, 6], v).unwrap();
            prop_assert_eq!(signature(&x.scale(alpha).unwrap()).unwrap(), signature(&x).unwrap());
        }
    }
}
