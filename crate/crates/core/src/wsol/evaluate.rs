use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bbox::{iou, BBox};
use super::components::{label, Connectivity};
use crate::error::{Error, Result};
use crate::saliency::SaliencyMap;
use crate::scalar::Scalar;

/// Number of thresholds in the sweep `0.01, 0.02, ..., 1.00`.
pub const THRESHOLD_STEPS: usize = 100;

/// A prediction counts only when its IoU strictly exceeds this.
pub const IOU_THRESHOLD: f64 = 0.5;

pub fn sweep_threshold(i: usize) -> f64 {
    i as f64 / THRESHOLD_STEPS as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxSelection {
    pub threshold: f64,
    pub boxes: Vec<BBox>,
    /// Component count at `threshold`, before truncation.
    pub component_count: usize,
    pub exact_count_match: bool,
}

/// Sweeps the threshold and picks the first level whose component count
/// equals `target_count`, else the level with the closest count.
pub fn boxes_from_map<T: Scalar>(map: &SaliencyMap<T>, target_count: usize, conn: Connectivity) -> Result<BoxSelection> {
    if target_count == 0 {
        return Err(Error::InvalidParameter("target_count must be at least 1".into()));
    }
    let (h, w) = (map.height(), map.width());
    let values: Vec<f64> = map.values().data().iter().map(|v| v.as_f64()).collect();
    let mut best: Option<(usize, f64, Vec<BBox>)> = None;
    for i in 1..=THRESHOLD_STEPS {
        let t = sweep_threshold(i);
        let mask: Vec<bool> = values.iter().map(|&v| v >= t).collect();
        let comps = label(&mask, h, w, conn);
        if comps.is_empty() {
            continue;
        }
        let gap = comps.len().abs_diff(target_count);
        if best.as_ref().is_none_or(|(g, _, _)| gap < *g) {
            best = Some((gap, t, comps.iter().map(|c| c.bbox).collect()));
        }
        if gap == 0 {
            break;
        }
    }
    let (gap, threshold, mut boxes) = best.ok_or(Error::NoComponents)?;
    let component_count = boxes.len();
    boxes.truncate(target_count);
    Ok(BoxSelection {
        threshold,
        boxes,
        component_count,
        exact_count_match: gap == 0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// IoU of the prediction matched to each ground-truth box, 0 if none.
    pub ious: Vec<f64>,
    pub positive: bool,
}

/// Greedy matching: repeatedly pairs the remaining prediction and
/// ground-truth box with the largest IoU.
pub fn match_and_score(pred: &[BBox], gt: &[BBox]) -> MatchResult {
    let mut ious = vec![0.0; gt.len()];
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(pred.len() * gt.len());
    for (p, pb) in pred.iter().enumerate() {
        for (g, gb) in gt.iter().enumerate() {
            pairs.push((iou(pb, gb), p, g));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut pred_used = vec![false; pred.len()];
    let mut gt_used = vec![false; gt.len()];
    for (v, p, g) in pairs {
        if pred_used[p] || gt_used[g] || v <= 0.0 {
            continue;
        }
        pred_used[p] = true;
        gt_used[g] = true;
        ious[g] = v;
    }
    let positive = !gt.is_empty() && ious.iter().all(|&v| v > IOU_THRESHOLD);
    MatchResult { ious, positive }
}

#[derive(Clone, Debug)]
pub struct WsolRecord<T> {
    id: String,
    map: SaliencyMap<T>,
    gt_boxes: Vec<BBox>,
}

impl<T: Scalar> WsolRecord<T> {
    pub fn new(id: impl Into<String>, map: SaliencyMap<T>, gt_boxes: Vec<BBox>) -> Result<Self> {
        let id = id.into();
        if gt_boxes.is_empty() {
            return Err(Error::InvalidParameter(format!("record {id} has no ground-truth boxes")));
        }
        if let Some(b) = gt_boxes.iter().find(|b| !b.fits(map.height(), map.width())) {
            return Err(Error::OutOfRange(format!(
                "record {id}: box {b:?} outside {}x{} map",
                map.height(),
                map.width()
            )));
        }
        Ok(WsolRecord { id, map, gt_boxes })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn map(&self) -> &SaliencyMap<T> {
        &self.map
    }

    pub fn gt_boxes(&self) -> &[BBox] {
        &self.gt_boxes
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordOutcome {
    pub id: String,
    /// `None` when the map has no foreground at any threshold.
    pub threshold: Option<f64>,
    pub component_count: usize,
    pub exact_count_match: bool,
    pub boxes: Vec<BBox>,
    pub ious: Vec<f64>,
    pub positive: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WsolReport {
    pub error_rate: f64,
    pub total: usize,
    pub negatives: usize,
    pub records: Vec<RecordOutcome>,
}

pub fn evaluate_record<T: Scalar>(r: &WsolRecord<T>, conn: Connectivity) -> Result<RecordOutcome> {
    match boxes_from_map(&r.map, r.gt_boxes.len(), conn) {
        Ok(sel) => {
            let m = match_and_score(&sel.boxes, &r.gt_boxes);
            Ok(RecordOutcome {
                id: r.id.clone(),
                threshold: Some(sel.threshold),
                component_count: sel.component_count,
                exact_count_match: sel.exact_count_match,
                boxes: sel.boxes,
                ious: m.ious,
                positive: m.positive,
            })
        }
        Err(Error::NoComponents) => Ok(RecordOutcome {
            id: r.id.clone(),
            threshold: None,
            component_count: 0,
            exact_count_match: false,
            boxes: Vec::new(),
            ious: vec![0.0; r.gt_boxes.len()],
            positive: false,
        }),
        Err(e) => Err(e),
    }
}

/// Scores every record; records are processed in parallel and reported in
/// input order.
pub fn evaluate<T: Scalar>(records: impl IntoIterator<Item = WsolRecord<T>>, conn: Connectivity) -> Result<WsolReport> {
    let records: Vec<WsolRecord<T>> = records.into_iter().collect();
    if records.is_empty() {
        return Err(Error::NoData);
    }
    let outcomes = records
        .par_iter()
        .map(|r| evaluate_record(r, conn))
        .collect::<Result<Vec<_>>>()?;
    let negatives = outcomes.iter().filter(|o| !o.positive).count();
    Ok(WsolReport {
        error_rate: negatives as f64 / outcomes.len() as f64,
        total: outcomes.len(),
        negatives,
        records: outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use proptest::prelude::*;

    fn b(x0: usize, y0: usize, x1: usize, y1: usize) -> BBox {
        BBox::new(x0, y0, x1, y1).unwrap()
    }

    fn smap(h: usize, w: usize, f: impl Fn(usize, usize) -> f64) -> SaliencyMap<f64> {
        SaliencyMap::new(Tensor::from_fn2(h, w, f).unwrap()).unwrap()
    }

    fn rect_map(h: usize, w: usize, boxes: &[BBox]) -> SaliencyMap<f64> {
        smap(h, w, |r, c| {
            let inside = boxes.iter().any(|b| (b.y_min..=b.y_max).contains(&r) && (b.x_min..=b.x_max).contains(&c));
            if inside {
                1.0
            } else {
                0.0
            }
        })
    }

    #[test]
    fn one_blob() {
        let m = rect_map(10, 10, &[b(2, 3, 5, 6)]);
        let s = boxes_from_map(&m, 1, Connectivity::Eight).unwrap();
        assert_eq!(s.threshold, 0.01);
        assert_eq!(s.boxes, vec![b(2, 3, 5, 6)]);
        assert!(s.exact_count_match);
    }

    #[test]
    fn two_plateaus() {
        let m = smap(6, 6, |r, c| match (r, c) {
            (0..=1, 0..=1) => 0.9,
            (4..=5, 4..=5) => 0.4,
            _ => 0.0,
        });
        let s = boxes_from_map(&m, 2, Connectivity::Eight).unwrap();
        assert_eq!(s.threshold, 0.01);
        assert_eq!(s.boxes.len(), 2);
        // above 0.4 only one plateau survives
        let s1 = boxes_from_map(&m, 1, Connectivity::Eight).unwrap();
        assert_eq!(s1.threshold, 0.41);
        assert_eq!(s1.boxes, vec![b(0, 0, 1, 1)]);
        assert!(s1.exact_count_match);
    }

    #[test]
    fn separation_needs_higher_threshold() {
        let m = smap(1, 7, |_, c| [1.0, 1.0, 0.3, 0.3, 0.3, 0.8, 0.8][c]);
        let s = boxes_from_map(&m, 2, Connectivity::Eight).unwrap();
        assert_eq!(s.threshold, 0.31);
        assert_eq!(s.boxes, vec![b(0, 0, 1, 0), b(5, 0, 6, 0)]);
    }

    #[test]
    fn closest_count_fallback_truncates() {
        let m = smap(1, 9, |_, c| if c % 2 == 0 { 1.0 } else { 0.0 });
        let s = boxes_from_map(&m, 2, Connectivity::Eight).unwrap();
        assert_eq!(s.component_count, 5);
        assert!(!s.exact_count_match);
        assert_eq!(s.threshold, 0.01);
        assert_eq!(s.boxes, vec![b(0, 0, 0, 0), b(2, 0, 2, 0)]);
    }

    #[test]
    fn zero_map() {
        let m = smap(4, 4, |_, _| 0.0);
        assert!(matches!(boxes_from_map(&m, 1, Connectivity::Eight), Err(Error::NoComponents)));
        assert!(boxes_from_map(&rect_map(4, 4, &[b(0, 0, 1, 1)]), 0, Connectivity::Eight).is_err());
    }

    #[test]
    fn matching_cases() {
        let gt = [b(0, 0, 9, 9), b(20, 20, 29, 29)];
        assert!(match_and_score(&gt, &gt).positive);
        let empty = match_and_score(&[], &gt);
        assert!(!empty.positive);
        assert_eq!(empty.ious, vec![0.0, 0.0]);
        // second prediction only overlaps its target by 25/175
        let pred = [b(0, 0, 9, 9), b(25, 25, 34, 34)];
        let m = match_and_score(&pred, &gt);
        assert_eq!(m.ious[0], 1.0);
        assert!((m.ious[1] - 25.0 / 175.0).abs() < 1e-12);
        assert!(!m.positive);
    }

    #[test]
    fn greedy_prefers_global_max() {
        // p0 overlaps both gts; p1-g0 is the global max and is paired first.
        let gt = [b(0, 0, 9, 9), b(4, 0, 13, 9)];
        let pred = [b(3, 0, 12, 9), b(0, 0, 8, 9)];
        let m = match_and_score(&pred, &gt);
        assert!((m.ious[1] - iou(&pred[0], &gt[1])).abs() < 1e-15);
        assert!((m.ious[0] - iou(&pred[1], &gt[0])).abs() < 1e-15);
        assert!(m.positive);
    }

    #[test]
    fn evaluate_mixed() {
        let good = WsolRecord::new("a", rect_map(8, 8, &[b(1, 1, 3, 3)]), vec![b(1, 1, 3, 3)]).unwrap();
        let bad = WsolRecord::new("b", smap(8, 8, |_, _| 0.0), vec![b(1, 1, 3, 3)]).unwrap();
        let r = evaluate(vec![good, bad], Connectivity::Eight).unwrap();
        assert_eq!(r.total, 2);
        assert_eq!(r.negatives, 1);
        assert_eq!(r.error_rate, 0.5);
        assert_eq!(r.records[1].threshold, None);
        assert!(matches!(
            evaluate(Vec::<WsolRecord<f64>>::new(), Connectivity::Eight),
            Err(Error::NoData)
        ));
    }

    #[test]
    fn record_validation() {
        assert!(WsolRecord::new("x", smap(4, 4, |_, _| 0.0), vec![]).is_err());
        assert!(WsolRecord::new("x", smap(4, 4, |_, _| 0.0), vec![b(0, 0, 4, 1)]).is_err());
    }

    proptest! {
        #[test]
        fn selected_boxes_fit_and_respect_count(
            vals in proptest::collection::vec(0.0f64..1.0, 64),
            target in 1usize..5,
        ) {
            let m = SaliencyMap::new(Tensor::from_vec([8, 8], vals).unwrap()).unwrap();
            if let Ok(s) = boxes_from_map(&m, target, Connectivity::Eight) {
                prop_assert!(s.boxes.len() <= target);
                prop_assert!(s.boxes.iter().all(|b| b.fits(8, 8)));
                prop_assert!((0.01..=1.0).contains(&s.threshold));
            }
        }

        #[test]
        fn positive_implies_all_matched(
            raw in proptest::collection::vec((0usize..12, 0usize..12, 0usize..6, 0usize..6), 1..6),
            split in 0usize..6,
        ) {
            let boxes: Vec<BBox> = raw.iter().map(|&(x, y, w, h)| b(x, y, x + w, y + h)).collect();
            let split = split.min(boxes.len() - 1);
            let (pred, gt) = boxes.split_at(split);
            let m = match_and_score(pred, gt);
            if m.positive {
                prop_assert!(pred.len() >= gt.len());
                prop_assert!(m.ious.iter().all(|&v| v > IOU_THRESHOLD));
            }
        }

        #[test]
        fn evaluate_is_permutation_invariant(seed in any::<u64>()) {
            let mut rng = crate::rng::seeded_rng(crate::rng::Seed(seed));
            let recs: Vec<WsolRecord<f64>> = (0..6).map(|i| {
                let x = rng.below(8);
                let y = rng.below(8);
                let gt = b(x, y, x + 3, y + 3);
                let noisy = rng.uniform() < 0.5;
                let vals: Vec<f64> = (0..144).map(|_| rng.uniform()).collect();
                let map = if noisy {
                    SaliencyMap::new(Tensor::from_vec([12, 12], vals).unwrap()).unwrap()
                } else {
                    rect_map(12, 12, &[gt])
                };
                WsolRecord::new(format!("r{i}"), map, vec![gt]).unwrap()
            }).collect();
            let fwd = evaluate(recs.clone(), Connectivity::Eight).unwrap();
            let rev = evaluate(recs.into_iter().rev(), Connectivity::Eight).unwrap();
            prop_assert_eq!(fwd.error_rate, rev.error_rate);
        }
    }
}
