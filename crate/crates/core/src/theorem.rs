//! Monte-Carlo check of foreground recovery from the image signature.
//!
//! A signal `I = f + b` mixes a spatially sparse foreground `f` with a
//! background `b = C^T x` whose DCT coefficients `x` are sparse. The claim
//! under test: the cosine similarity between `idct(sign(dct(f)))` and
//! `idct(sign(dct(I)))` is at least 0.5 in expectation when
//! `|supp(x)| <= n / 6`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::cosine_similarity;
use crate::rng::{seeded_rng, RandomStream, Seed};
use crate::scalar::Scalar;
use crate::spectral::{idct, reconstruct, signature, Basis, SpectralTensor};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Amplitude {
    /// Uniform on {-1, +1}.
    Rademacher,
    /// Standard normal.
    #[default]
    Normal,
}

impl Amplitude {
    fn draw(self, rng: &mut RandomStream) -> f64 {
        match self {
            Amplitude::Rademacher => rng.rademacher(),
            Amplitude::Normal => rng.standard_normal(),
        }
    }
}

/// Mixture parameters. `shape` is `[n]` for the 1-D experiment or `[h, w]`
/// for the image variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseMixSpec {
    pub shape: Vec<usize>,
    pub fg_support: usize,
    pub bg_support: usize,
    pub fg_law: Amplitude,
    pub bg_law: Amplitude,
    pub seed: Seed,
}

impl SparseMixSpec {
    pub fn new(n: usize, fg_support: usize, bg_support: usize, seed: Seed) -> Self {
        SparseMixSpec {
            shape: vec![n],
            fg_support,
            bg_support,
            fg_law: Amplitude::Rademacher,
            bg_law: Amplitude::Normal,
            seed,
        }
    }

    pub fn image(height: usize, width: usize, fg_support: usize, bg_support: usize, seed: Seed) -> Self {
        SparseMixSpec {
            shape: vec![height, width],
            ..SparseMixSpec::new(0, fg_support, bg_support, seed)
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Background sparse enough for the expectation bound to apply.
    pub fn is_in_theorem(&self) -> bool {
        self.bg_support <= self.len() / 6
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if !(1..=2).contains(&self.shape.len()) || n == 0 {
            return Err(Error::InvalidSpec(format!("unsupported signal shape {:?}", self.shape)));
        }
        if self.fg_support == 0 || self.fg_support > n {
            return Err(Error::InvalidSpec(format!(
                "foreground support {} outside 1..={n}",
                self.fg_support
            )));
        }
        if self.bg_support > n {
            return Err(Error::InvalidSpec(format!(
                "background support {} exceeds {n}",
                self.bg_support
            )));
        }
        Ok(())
    }

    /// Same mixture law with the seed for trial `i`.
    pub fn trial(&self, i: usize) -> SparseMixSpec {
        SparseMixSpec {
            seed: self.seed.derive(i as u64),
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mixture<T> {
    pub foreground: Tensor<T>,
    /// Sparse DCT coefficients of the background.
    pub background_coefficients: Tensor<T>,
    pub background: Tensor<T>,
    pub signal: Tensor<T>,
    /// Sorted flat indices of the foreground support.
    pub support: Vec<usize>,
}

/// Draws `f`, `x`, `b = idct(x)` and `I = f + b`. Foreground positions and
/// values are drawn first, then background positions and values.
pub fn sample_mixture<T: Scalar>(spec: &SparseMixSpec) -> Result<Mixture<T>> {
    spec.validate()?;
    let n = spec.len();
    let mut rng = seeded_rng(spec.seed);

    let mut support = rng.sample_indices(n, spec.fg_support);
    let mut f = vec![T::zero(); n];
    for &i in &support {
        f[i] = T::of(spec.fg_law.draw(&mut rng));
    }
    support.sort_unstable();

    let mut x = vec![T::zero(); n];
    for i in rng.sample_indices(n, spec.bg_support) {
        x[i] = T::of(spec.bg_law.draw(&mut rng));
    }

    let x = Tensor::from_vec(spec.shape.clone(), x)?;
    let b = idct(&SpectralTensor::new(x.clone(), Basis::Dct))?;
    let signal: Vec<T> = f.iter().zip(b.data()).map(|(&a, &c)| a + c).collect();
    Ok(Mixture {
        foreground: Tensor::from_vec(spec.shape.clone(), f)?,
        background_coefficients: x,
        background: b,
        signal: Tensor::from_vec(spec.shape.clone(), signal)?,
        support,
    })
}

/// Cosine similarity of the signature reconstructions of `f` and `signal`.
pub fn trial_similarity<T: Scalar>(f: &Tensor<T>, signal: &Tensor<T>) -> Result<f64> {
    let rf = reconstruct(&signature(f)?)?;
    let ri = reconstruct(&signature(signal)?)?;
    Ok(cosine_similarity(&rf, &ri)?.as_f64())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremEstimate {
    pub trials: usize,
    pub mean: f64,
    /// Sample standard deviation over `sqrt(trials)`; 0 for a single trial.
    pub stderr: f64,
    pub similarities: Vec<f64>,
}

impl TheoremEstimate {
    fn from_values(similarities: Vec<f64>) -> Self {
        let t = similarities.len() as f64;
        let mean = similarities.iter().sum::<f64>() / t;
        let stderr = if similarities.len() > 1 {
            let var = similarities.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t - 1.0);
            (var / t).sqrt()
        } else {
            0.0
        };
        TheoremEstimate {
            trials: similarities.len(),
            mean,
            stderr,
            similarities,
        }
    }
}

/// Runs `trials` independent mixtures; trial `i` uses `spec.trial(i)`. Trials
/// run in parallel and are collected in order.
pub fn estimate_bound_as<T: Scalar>(spec: &SparseMixSpec, trials: usize) -> Result<TheoremEstimate> {
    spec.validate()?;
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let sims = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mix = sample_mixture::<T>(&spec.trial(i))?;
            trial_similarity(&mix.foreground, &mix.signal)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TheoremEstimate::from_values(sims))
}

pub fn estimate_bound(spec: &SparseMixSpec, trials: usize) -> Result<TheoremEstimate> {
    estimate_bound_as::<f64>(spec, trials)
}

/// Mean of `map` over `support` divided by its mean elsewhere.
pub fn support_energy_ratio<T: Scalar>(map: &Tensor<T>, support: &[usize]) -> Result<f64> {
    let mut on = vec![false; map.len()];
    for &i in support {
        *on.get_mut(i)
            .ok_or_else(|| Error::OutOfRange(format!("support index {i} outside {} entries", map.len())))? = true;
    }
    let (mut s_on, mut n_on, mut s_off, mut n_off) = (0.0, 0usize, 0.0, 0usize);
    for (v, &inside) in map.data().iter().zip(&on) {
        if inside {
            s_on += v.as_f64();
            n_on += 1;
        } else {
            s_off += v.as_f64();
            n_off += 1;
        }
    }
    if n_on == 0 || n_off == 0 {
        return Err(Error::DegenerateInput("support must be a proper nonempty subset".into()));
    }
    let off = s_off / n_off as f64;
    if off == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((s_on / n_on as f64) / off)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremSummary {
    pub n: usize,
    pub fg_support: usize,
    pub bg_support: usize,
    pub trials: usize,
    pub mean: f64,
    pub stderr: f64,
    pub seed: Seed,
}

impl TheoremSummary {
    pub fn new(spec: &SparseMixSpec, est: &TheoremEstimate) -> Self {
        TheoremSummary {
            n: spec.len(),
            fg_support: spec.fg_support,
            bg_support: spec.bg_support,
            trials: est.trials,
            mean: est.mean,
            stderr: est.stderr,
            seed: spec.seed,
        }
    }
}

pub fn trials_csv(est: &TheoremEstimate) -> String {
    let mut s = String::from("trial,similarity\n");
    for (i, v) in est.similarities.iter().enumerate() {
        let _ = writeln!(s, "{i},{v:?}");
    }
    s
}

pub fn write_trials_csv(path: &Path, est: &TheoremEstimate) -> Result<()> {
    fs::write(path, trials_csv(est)).map_err(|e| Error::io(path, e))
}
