//! Shared numeric utilities: normalization, resizing and similarity measures.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Rescales to `[0, 1]` by `(x - min) / (max - min)`. A constant tensor maps
/// to all zeros.
pub fn minmax_normalize<T: Scalar>(t: &Tensor<T>) -> Tensor<T> {
    let (lo, hi) = (t.min(), t.max());
    let range = hi - lo;
    let data = if range > T::zero() {
        t.data().iter().map(|&v| (v - lo) / range).collect()
    } else {
        vec![T::zero(); t.len()]
    };
    Tensor::from_parts(t.shape().to_vec(), data)
}

/// Source sample positions for one axis under half-pixel centers:
/// `(i + 0.5) * in/out - 0.5`, clamped to `[0, in - 1]`.
fn sample_axis<T: Scalar>(input: usize, output: usize) -> Vec<(usize, usize, T)> {
    let ratio = T::of_usize(input) / T::of_usize(output);
    let last = T::of_usize(input - 1);
    let half = T::of(0.5);
    (0..output)
        .map(|i| {
            let src = ((T::of_usize(i) + half) * ratio - half).max(T::zero()).min(last);
            let lo = src.floor();
            let i0 = lo.to_usize().expect("clamped coordinate");
            let i1 = (i0 + 1).min(input - 1);
            (i0, i1, src - lo)
        })
        .collect()
}

#[inline]
fn lerp<T: Scalar>(a: T, b: T, frac: T) -> T {
    let v = a + (b - a) * frac;
    // keep rounding from stepping outside the bracketing samples
    v.max(a.min(b)).min(a.max(b))
}

/// Bilinear resize of a rank-2 tensor with half-pixel sample centers.
pub fn resize_bilinear<T: Scalar>(t: &Tensor<T>, out_h: usize, out_w: usize) -> Result<Tensor<T>> {
    let (h, w) = t.dims2()?;
    if out_h == 0 || out_w == 0 {
        return Err(Error::InvalidShape(format!(
            "output size {out_h}x{out_w} must be at least 1x1"
        )));
    }
    if (h, w) == (out_h, out_w) {
        return Ok(t.clone());
    }
    let rows = sample_axis::<T>(h, out_h);
    let cols = sample_axis::<T>(w, out_w);
    let mut out = Vec::with_capacity(out_h * out_w);
    for &(r0, r1, fr) in &rows {
        for &(c0, c1, fc) in &cols {
            let top = lerp(t.at2(r0, c0), t.at2(r0, c1), fc);
            let bottom = lerp(t.at2(r1, c0), t.at2(r1, c1), fc);
            out.push(lerp(top, bottom, fr));
        }
    }
    Ok(Tensor::from_parts(vec![out_h, out_w], out))
}

/// `<a, b> / (|a| |b|)`, clamped to `[-1, 1]`.
pub fn cosine_similarity<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<T> {
    if a.shape() != b.shape() {
        return Err(Error::InvalidShape(format!(
            "cosine similarity of {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let (mut dot, mut saa, mut sbb) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in a.data().iter().zip(b.data()) {
        dot += x * y;
        saa += x * x;
        sbb += y * y;
    }
    if saa == T::zero() || sbb == T::zero() {
        return Err(Error::DegenerateInput(
            "cosine similarity of a zero vector".into(),
        ));
    }
    // one rounding in the denominator keeps cos(a, a) == 1; split the root
    // only when the product leaves the normal range
    let prod = saa * sbb;
    let denom = if prod.is_normal() { prod.sqrt() } else { saa.sqrt() * sbb.sqrt() };
    Ok((dot / denom).max(-T::one()).min(T::one()))
}

/// Fractional ranks starting at 1; ties share their average rank.
pub fn fractional_ranks<T: Scalar>(values: &[T]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("finite values"));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation: Pearson correlation of fractional ranks.
pub fn spearman_rank<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::InvalidShape(format!(
            "rank correlation of {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    if a.len() < 2 {
        return Err(Error::InvalidShape(
            "rank correlation needs at least two elements".into(),
        ));
    }
    pearson(&fractional_ranks(a.data()), &fractional_ranks(b.data()))
        .ok_or_else(|| Error::DegenerateInput("rank correlation of a constant input".into()))
}
