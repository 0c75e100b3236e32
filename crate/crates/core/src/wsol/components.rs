use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::bbox::BBox;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(isize, isize)] {
        const FOUR: [(isize, isize); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
        const EIGHT: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }
}

/// A connected set of foreground pixels, stored as `(row, col)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    pub pixels: Vec<(usize, usize)>,
    pub bbox: BBox,
}

impl Component {
    pub fn area(&self) -> usize {
        self.pixels.len()
    }
}

/// Labels the `true` cells of a `height x width` grid.
pub(crate) fn label(mask: &[bool], height: usize, width: usize, conn: Connectivity) -> Vec<Component> {
    let mut seen = vec![false; mask.len()];
    let mut comps = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut pixels = Vec::new();
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        while let Some(p) = queue.pop_front() {
            let (r, c) = (p / width, p % width);
            pixels.push((r, c));
            x0 = x0.min(c);
            x1 = x1.max(c);
            y0 = y0.min(r);
            y1 = y1.max(r);
            for &(dr, dc) in conn.offsets() {
                let (nr, nc) = (r as isize + dr, c as isize + dc);
                if nr < 0 || nc < 0 || nr >= height as isize || nc >= width as isize {
                    continue;
                }
                let q = nr as usize * width + nc as usize;
                if mask[q] && !seen[q] {
                    seen[q] = true;
                    queue.push_back(q);
                }
            }
        }
        pixels.sort_unstable();
        comps.push(Component {
            pixels,
            bbox: BBox {
                x_min: x0,
                y_min: y0,
                x_max: x1,
                y_max: y1,
            },
        });
    }
    comps.sort_by_key(|c| (std::cmp::Reverse(c.area()), c.bbox.y_min, c.bbox.x_min));
    comps
}

/// Components of a binary mask (entries 0 or 1), ordered by area descending,
/// then top edge, then left edge.
pub fn connected_components<T: Scalar>(mask: &Tensor<T>, conn: Connectivity) -> Result<Vec<Component>> {
    let (h, w) = mask.dims2()?;
    let mut bits = Vec::with_capacity(h * w);
    for &v in mask.data() {
        if v == T::one() {
            bits.push(true);
        } else if v == T::zero() {
            bits.push(false);
        } else {
            return Err(Error::InvalidParameter(format!("mask entry {v} is not 0 or 1")));
        }
    }
    Ok(label(&bits, h, w, conn))
}
