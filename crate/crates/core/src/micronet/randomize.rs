use super::model::{LayerWeights, ModelBundle};
use crate::error::{Error, Result};
use crate::rng::{seeded_rng, RandomStream, Seed};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Standard deviation used when the original tensor is constant.
pub const FALLBACK_STD: f64 = 0.05;

/// Sub-seed for the layer at position `layer_index` in the model.
pub fn layer_seed(seed: Seed, layer_index: usize) -> Seed {
    seed.derive(layer_index as u64)
}

fn population_std<T: Scalar>(t: &Tensor<T>) -> f64 {
    let n = t.len() as f64;
    let mean = t.data().iter().map(|v| v.as_f64()).sum::<f64>() / n;
    (t.data().iter().map(|v| (v.as_f64() - mean).powi(2)).sum::<f64>() / n).sqrt()
}

fn redraw<T: Scalar>(t: &Tensor<T>, rng: &mut RandomStream) -> Result<Tensor<T>> {
    let std = match population_std(t) {
        s if s > 0.0 => s,
        _ => FALLBACK_STD,
    };
    let data = (0..t.len()).map(|_| T::of(rng.normal(0.0, std))).collect();
    Tensor::from_vec(t.shape().to_vec(), data)
}

/// Copy of `m` with layer `name`'s kernel and bias redrawn i.i.d. from
/// `N(0, sigma^2)`, where sigma is each tensor's own standard deviation.
/// Kernel values are drawn first, then bias, from one stream.
pub fn randomize_layer<T: Scalar>(m: &ModelBundle<T>, name: &str, seed: Seed) -> Result<ModelBundle<T>> {
    let idx = m.layer_index(name)?;
    if !m.layers()[idx].kind.is_parametric() {
        return Err(Error::NotParametric(name.to_string()));
    }
    let old = m.weights(name).expect("parametric layers have weights");
    let mut rng = seeded_rng(seed);
    let kernel = redraw(&old.kernel, &mut rng)?;
    let bias = redraw(&old.bias, &mut rng)?;
    m.with_weights(name, LayerWeights { kernel, bias })
}

/// Randomizes every parametric layer from the output end back to `upto`
/// inclusive. Layer `i` uses [`layer_seed`]`(seed, i)`.
pub fn cascading_randomize<T: Scalar>(m: &ModelBundle<T>, upto: &str, seed: Seed) -> Result<ModelBundle<T>> {
    let stop = m.layer_index(upto)?;
    if !m.layers()[stop].kind.is_parametric() {
        return Err(Error::NotParametric(upto.to_string()));
    }
    let mut out = m.clone();
    for idx in m.parametric_layers().into_iter().rev().filter(|&i| i >= stop) {
        let name = &m.layers()[idx].name;
        out = randomize_layer(&out, name, layer_seed(seed, idx))?;
    }
    Ok(out)
}
