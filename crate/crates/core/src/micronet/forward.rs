use super::model::{conv_geometry, LayerKind, LayerWeights, ModelBundle, Padding};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Every intermediate of one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace<T> {
    pub input: Tensor<T>,
    /// `(layer name, output)` in layer order.
    pub outputs: Vec<(String, Tensor<T>)>,
    pub probabilities: Tensor<T>,
}

impl<T: Scalar> ForwardTrace<T> {
    pub fn output(&self, name: &str) -> Result<&Tensor<T>> {
        self.outputs
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| Error::UnknownLayer(name.to_string()))
    }
}

/// Runs the model on `img` (`[h, w]` for one channel, or `[c, h, w]`).
///
/// If the last layer is not a softmax, `probabilities` is the softmax of the
/// flattened final output.
pub fn forward<T: Scalar>(m: &ModelBundle<T>, img: &Tensor<T>) -> Result<ForwardTrace<T>> {
    let input = match img.rank() {
        2 => {
            let (h, w) = img.dims2()?;
            img.clone().reshape([1, h, w])?
        }
        3 => img.clone(),
        _ => {
            return Err(Error::ShapeError(format!(
                "input must be [h, w] or [c, h, w], got {:?}",
                img.shape()
            )))
        }
    };
    if input.shape() != m.input_shape() {
        return Err(Error::ShapeError(format!(
            "model expects input {:?}, got {:?}",
            m.input_shape(),
            input.shape()
        )));
    }

    let mut outputs = Vec::with_capacity(m.layers().len());
    let mut cur = input.clone();
    for layer in m.layers() {
        let wts = || m.weights(&layer.name).expect("validated at construction");
        cur = match &layer.kind {
            LayerKind::Conv2d {
                stride, padding, ..
            } => conv2d(&cur, wts(), *stride, *padding)?,
            LayerKind::Relu => relu(&cur),
            LayerKind::MaxPool2 => maxpool2(&cur)?,
            LayerKind::GlobalAvgPool => global_avg_pool(&cur)?,
            LayerKind::Dense { .. } => dense(&cur, wts())?,
            LayerKind::Softmax => softmax(&cur)?,
        };
        outputs.push((layer.name.clone(), cur.clone()));
    }
    let probabilities = match m.layers().last().map(|l| &l.kind) {
        Some(LayerKind::Softmax) => cur,
        _ => softmax(&cur.clone().reshape([cur.len()])?)?,
    };
    Ok(ForwardTrace {
        input,
        outputs,
        probabilities,
    })
}

/// Cross-correlation with bias. Kernel `[out, in, kh, kw]`, input `[in, h, w]`.
pub fn conv2d<T: Scalar>(x: &Tensor<T>, wts: &LayerWeights<T>, stride: usize, padding: Padding) -> Result<Tensor<T>> {
    let (c, h, w) = x.dims3()?;
    let &[oc, ic, kh, kw] = wts.kernel.shape() else {
        return Err(Error::ShapeError("conv kernel must be rank 4".into()));
    };
    if ic != c {
        return Err(Error::ShapeError(format!("conv kernel expects {ic} channels, input has {c}")));
    }
    let geometry = |size, k| {
        conv_geometry(size, k, stride, padding)
            .ok_or_else(|| Error::ShapeError(format!("kernel {k} larger than input {size}")))
    };
    let (oh, pad_top) = geometry(h, kh)?;
    let (ow, pad_left) = geometry(w, kw)?;
    let (xd, kd, bd) = (x.data(), wts.kernel.data(), wts.bias.data());

    let mut out = vec![T::zero(); oc * oh * ow];
    for o in 0..oc {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = bd[o];
                for i in 0..c {
                    for ky in 0..kh {
                        let iy = (oy * stride + ky) as isize - pad_top as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let xrow = (i * h + iy as usize) * w;
                        let krow = ((o * ic + i) * kh + ky) * kw;
                        for kx in 0..kw {
                            let ix = (ox * stride + kx) as isize - pad_left as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            acc += kd[krow + kx] * xd[xrow + ix as usize];
                        }
                    }
                }
                out[(o * oh + oy) * ow + ox] = acc;
            }
        }
    }
    Tensor::from_vec([oc, oh, ow], out)
}

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| v.max(T::zero())).expect("relu keeps values finite")
}

/// 2x2 max pooling with stride 2; a trailing odd row or column is dropped.
pub fn maxpool2<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (c, h, w) = x.dims3()?;
    let (oh, ow) = (h / 2, w / 2);
    let d = x.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for y in 0..oh {
            for xx in 0..ow {
                let at = |dy: usize, dx: usize| d[(ch * h + 2 * y + dy) * w + 2 * xx + dx];
                out.push(at(0, 0).max(at(0, 1)).max(at(1, 0)).max(at(1, 1)));
            }
        }
    }
    Tensor::from_vec([c, oh, ow], out)
}

pub fn global_avg_pool<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (c, h, w) = x.dims3()?;
    let plane = h * w;
    let inv = T::one() / T::of_usize(plane);
    let out = x.data().chunks(plane).map(|p| p.iter().copied().sum::<T>() * inv).collect();
    Tensor::from_vec([c], out)
}

/// `W x + b` with `W` of shape `[out, in]`; the input is flattened.
pub fn dense<T: Scalar>(x: &Tensor<T>, wts: &LayerWeights<T>) -> Result<Tensor<T>> {
    let &[out_f, in_f] = wts.kernel.shape() else {
        return Err(Error::ShapeError("dense kernel must be rank 2".into()));
    };
    if x.len() != in_f {
        return Err(Error::ShapeError(format!("dense expects {in_f} inputs, got {}", x.len())));
    }
    let k = wts.kernel.data();
    let out = (0..out_f)
        .map(|o| {
            wts.bias.data()[o]
                + k[o * in_f..(o + 1) * in_f]
                    .iter()
                    .zip(x.data())
                    .map(|(&a, &b)| a * b)
                    .sum::<T>()
        })
        .collect();
    Tensor::from_vec([out_f], out)
}

/// `exp(x - max) / sum`, computed with max subtraction.
pub fn softmax<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    if x.rank() != 1 {
        return Err(Error::ShapeError(format!("softmax needs rank 1, got {:?}", x.shape())));
    }
    let mx = x.max();
    let exps: Vec<T> = x.data().iter().map(|&v| (v - mx).exp()).collect();
    let total: T = exps.iter().copied().sum();
    Tensor::from_vec([x.len()], exps.into_iter().map(|e| e / total).collect())
}
