//! Localization scoring: saliency map to thresholded components to boxes,
//! matched against ground truth by IoU.

mod bbox;
mod components;
mod evaluate;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use bbox::{iou, BBox};
pub use components::{connected_components, Component, Connectivity};
pub use evaluate::{
    boxes_from_map, evaluate, evaluate_record, match_and_score, sweep_threshold, BoxSelection, MatchResult,
    RecordOutcome, WsolRecord, WsolReport, IOU_THRESHOLD, THRESHOLD_STEPS,
};

use crate::error::{Error, Result};
use crate::io::{read_tensor, write_tensor};
use crate::rng::{seeded_rng, RandomStream, Seed};
use crate::saliency::SaliencyMap;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    /// Path to a rank-2 `.npy` map, relative to the manifest's directory.
    pub map: PathBuf,
    pub gt: Vec<BBox>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub records: Vec<ManifestEntry>,
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
}

/// Loads a manifest and every map it names.
pub fn load_records(path: &Path) -> Result<Vec<WsolRecord<f64>>> {
    let manifest = read_manifest(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    manifest
        .records
        .into_iter()
        .map(|e| {
            let values = read_tensor(&base.join(&e.map))?;
            WsolRecord::new(e.id, SaliencyMap::new(values)?, e.gt)
        })
        .collect()
}

/// Writes `<id>.npy` for every record plus `manifest.json` into `dir`.
pub fn write_records(dir: &Path, records: &[WsolRecord<f64>]) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(records.len());
    for r in records {
        let file = PathBuf::from(format!("{}.npy", r.id()));
        write_tensor(r.map().values(), dir.join(&file))?;
        entries.push(ManifestEntry {
            id: r.id().to_string(),
            map: file,
            gt: r.gt_boxes().to_vec(),
        });
    }
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&Manifest { records: entries })
        .map_err(|e| Error::json("manifest", e))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuiteKind {
    /// Map is 1 inside each ground-truth box and 0 elsewhere.
    Exact,
    /// Map is i.i.d. uniform noise.
    Noise,
}

fn random_box(rng: &mut RandomStream, x_lo: usize, x_hi: usize, h: usize) -> BBox {
    let max_side = (h / 3).max(4);
    let bw = (4 + rng.below(max_side - 3)).min(x_hi - x_lo);
    let bh = (4 + rng.below(max_side - 3)).min(h);
    let x = x_lo + rng.below(x_hi - x_lo - bw + 1);
    let y = rng.below(h - bh + 1);
    BBox {
        x_min: x,
        y_min: y,
        x_max: x + bw - 1,
        y_max: y + bh - 1,
    }
}

/// Seeded synthetic records with one or two ground-truth boxes each. When
/// there are two, they sit in opposite halves with a gap between them.
pub fn synthetic_suite(kind: SuiteKind, count: usize, height: usize, width: usize, seed: Seed) -> Result<Vec<WsolRecord<f64>>> {
    if height < 8 || width < 16 {
        return Err(Error::InvalidParameter(format!(
            "synthetic maps need at least 8x16 pixels, got {height}x{width}"
        )));
    }
    (0..count)
        .map(|i| {
            let mut rng = seeded_rng(seed.derive(i as u64));
            let gt = if rng.below(2) == 0 {
                vec![random_box(&mut rng, 0, width, height)]
            } else {
                let mid = width / 2;
                vec![
                    random_box(&mut rng, 0, mid - 1, height),
                    random_box(&mut rng, mid + 1, width, height),
                ]
            };
            let values = match kind {
                SuiteKind::Exact => Tensor::from_fn2(height, width, |r, c| {
                    let inside = gt
                        .iter()
                        .any(|b| (b.y_min..=b.y_max).contains(&r) && (b.x_min..=b.x_max).contains(&c));
                    if inside {
                        1.0
                    } else {
                        0.0
                    }
                })?,
                SuiteKind::Noise => {
                    let data = (0..height * width).map(|_| rng.uniform()).collect();
                    Tensor::from_vec([height, width], data)?
                }
            };
            WsolRecord::new(format!("img{i:04}"), SaliencyMap::new(values)?, gt)
        })
        .collect()
}
