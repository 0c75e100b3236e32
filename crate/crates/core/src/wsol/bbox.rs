use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box with inclusive integer pixel bounds. Serialized as
/// `[x_min, y_min, x_max, y_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[usize; 4]", into = "[usize; 4]")]
pub struct BBox {
    pub x_min: usize,
    pub y_min: usize,
    pub x_max: usize,
    pub y_max: usize,
}

impl BBox {
    pub fn new(x_min: usize, y_min: usize, x_max: usize, y_max: usize) -> Result<Self> {
        if x_min > x_max || y_min > y_max {
            return Err(Error::InvalidParameter(format!(
                "box ({x_min}, {y_min}, {x_max}, {y_max}) has min > max"
            )));
        }
        Ok(BBox {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn width(&self) -> usize {
        self.x_max - self.x_min + 1
    }

    pub fn height(&self) -> usize {
        self.y_max - self.y_min + 1
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn fits(&self, height: usize, width: usize) -> bool {
        self.x_max < width && self.y_max < height
    }

    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let x_min = self.x_min.max(other.x_min);
        let y_min = self.y_min.max(other.y_min);
        let x_max = self.x_max.min(other.x_max);
        let y_max = self.y_max.min(other.y_max);
        (x_min <= x_max && y_min <= y_max).then_some(BBox {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }
}

impl TryFrom<[usize; 4]> for BBox {
    type Error = Error;

    fn try_from(v: [usize; 4]) -> Result<Self> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [usize; 4] {
    fn from(b: BBox) -> Self {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

/// Intersection area over union area, counting pixels inclusively.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection(b).map_or(0, |i| i.area());
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(x0: usize, y0: usize, x1: usize, y1: usize) -> BBox {
        BBox::new(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn iou_examples() {
        assert_eq!(iou(&b(2, 3, 7, 9), &b(2, 3, 7, 9)), 1.0);
        assert_eq!(iou(&b(0, 0, 4, 4), &b(5, 5, 9, 9)), 0.0);
        let v = iou(&b(0, 0, 9, 9), &b(5, 5, 14, 14));
        assert!((v - 25.0 / 175.0).abs() < 1e-12);
        assert!((v - 0.142_857_142_857).abs() < 1e-12);
    }

    #[test]
    fn inclusive_areas() {
        assert_eq!(b(3, 3, 3, 3).area(), 1);
        assert_eq!(b(0, 0, 9, 4).area(), 50);
        assert!(BBox::new(5, 0, 4, 0).is_err());
    }

    #[test]
    fn serializes_as_array() {
        let s = serde_json::to_string(&b(1, 2, 3, 4)).unwrap();
        assert_eq!(s, "[1,2,3,4]");
        let back: BBox = serde_json::from_str(&s).unwrap();
        assert_eq!(back, b(1, 2, 3, 4));
        assert!(serde_json::from_str::<BBox>("[5,0,1,1]").is_err());
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (0usize..20, 0usize..20, 0usize..10, 0usize..10).prop_map(|(x, y, w, h)| b(x, y, x + w, y + h))
    }

    proptest! {
        #[test]
        fn iou_is_symmetric_and_bounded(a in arb_box(), c in arb_box()) {
            let v = iou(&a, &c);
            prop_assert_eq!(v, iou(&c, &a));
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(v == 1.0, a == c);
        }
    }
}
