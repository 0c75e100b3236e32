//! Model-randomization sanity checks for activation-based saliency.
//!
//! Each stage randomizes parametric layers (all of them from the output end
//! back to one layer, or one layer alone) and recomputes the Signature
//! Activation map at the tapped layer. Layers after the tap cannot change the
//! map, so their stages must reproduce the original bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_tensor;
use crate::micronet::{cascading_randomize, forward, layer_seed, randomize_layer, ModelBundle};
use crate::numeric::spearman_rank;
use crate::rng::Seed;
use crate::saliency::{signature_activation_map, ActivationStack, BilateralParams, SaliencyMap};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RandomizationMode {
    #[default]
    Cascading,
    Independent,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SanityStage<T> {
    pub layer: String,
    pub layer_index: usize,
    /// Randomized layer sits at or before the tap.
    pub upstream: bool,
    pub map: SaliencyMap<T>,
    pub spearman: f64,
    pub max_abs_diff: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SanityRun<T> {
    pub mode: RandomizationMode,
    pub tap: String,
    pub seed: Seed,
    pub original: SaliencyMap<T>,
    pub stages: Vec<SanityStage<T>>,
}

/// Signature Activation map of `layer`'s output, sized to the model input.
pub fn tap_map<T: Scalar>(
    m: &ModelBundle<T>,
    img: &Tensor<T>,
    layer: &str,
    params: &BilateralParams<T>,
) -> Result<SaliencyMap<T>> {
    let trace = forward(m, img)?;
    let acts = trace.output(layer)?;
    if acts.rank() != 3 {
        return Err(Error::ShapeError(format!(
            "layer {layer} output {:?} is not a [c, h, w] activation stack",
            acts.shape()
        )));
    }
    let [_, h, w] = m.input_shape();
    signature_activation_map(&ActivationStack::new(acts.clone())?, h, w, params)
}

/// Rank correlation with a fallback for constant maps: 1 when both maps are
/// the same constant, 0 otherwise.
pub fn map_spearman<T: Scalar>(a: &SaliencyMap<T>, b: &SaliencyMap<T>) -> Result<f64> {
    match spearman_rank(a.values(), b.values()) {
        Err(Error::DegenerateInput(_)) => {
            let (x, y) = (a.values(), b.values());
            let constant = |t: &Tensor<T>| t.min() == t.max();
            Ok(if constant(x) && constant(y) && x.min() == y.min() { 1.0 } else { 0.0 })
        }
        r => r,
    }
}

pub fn run_sanity<T: Scalar>(
    m: &ModelBundle<T>,
    img: &Tensor<T>,
    layer: &str,
    mode: RandomizationMode,
    seed: Seed,
    params: &BilateralParams<T>,
) -> Result<SanityRun<T>> {
    let tap_index = m.layer_index(layer)?;
    let original = tap_map(m, img, layer, params)?;
    let order: Vec<usize> = m.parametric_layers().into_iter().rev().collect();
    let stages = order
        .par_iter()
        .map(|&idx| {
            let name = &m.layers()[idx].name;
            let perturbed = match mode {
                RandomizationMode::Cascading => cascading_randomize(m, name, seed)?,
                RandomizationMode::Independent => randomize_layer(m, name, layer_seed(seed, idx))?,
            };
            let map = tap_map(&perturbed, img, layer, params)?;
            Ok(SanityStage {
                layer: name.clone(),
                layer_index: idx,
                upstream: idx <= tap_index,
                spearman: map_spearman(&original, &map)?,
                max_abs_diff: original.values().max_abs_diff(map.values())?.as_f64(),
                map,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SanityRun {
        mode,
        tap: layer.to_string(),
        seed,
        original,
        stages,
    })
}

#[derive(Serialize)]
struct StageMeta<'a> {
    stage: usize,
    layer: &'a str,
    upstream: bool,
    spearman: f64,
    max_abs_diff: f64,
    map: String,
}

#[derive(Serialize)]
struct RunMeta<'a> {
    mode: RandomizationMode,
    layer: &'a str,
    seed: Seed,
    original: &'a str,
    stages: Vec<StageMeta<'a>>,
}

fn stage_file(i: usize, layer: &str) -> String {
    format!("stage_{i}_{layer}.npy")
}

/// Writes `original.npy`, `stage_<i>_<layer>.npy`, `metrics.csv` and
/// `run.json` into `dir`.
pub fn write_run<T: Scalar>(dir: &Path, run: &SanityRun<T>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_tensor(&run.original.values().cast::<f64>()?, dir.join("original.npy"))?;
    let mut csv = String::from("stage,layer,upstream_flag,spearman,max_abs_diff\n");
    let mut stages = Vec::with_capacity(run.stages.len());
    for (i, s) in run.stages.iter().enumerate() {
        let file = stage_file(i, &s.layer);
        write_tensor(&s.map.values().cast::<f64>()?, dir.join(&file))?;
        let _ = writeln!(csv, "{i},{},{},{},{}", s.layer, s.upstream as u8, s.spearman, s.max_abs_diff);
        stages.push(StageMeta {
            stage: i,
            layer: &s.layer,
            upstream: s.upstream,
            spearman: s.spearman,
            max_abs_diff: s.max_abs_diff,
            map: file,
        });
    }
    let csv_path = dir.join("metrics.csv");
    fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;
    let meta = RunMeta {
        mode: run.mode,
        layer: &run.tap,
        seed: run.seed,
        original: "original.npy",
        stages,
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::json("run metadata", e))?;
    let json_path = dir.join("run.json");
    fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))
}
