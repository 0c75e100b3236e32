use super::{ActivationStack, SaliencyMap};
use crate::error::{Error, Result};
use crate::numeric::{minmax_normalize, resize_bilinear};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const POWER_TOL: f64 = 1e-10;
pub const POWER_MAX_ITERS: usize = 10_000;

/// Unit principal eigenvector of the channel Gram matrix `V^T V`, where `V`
/// has one column per channel and one row per grid position. This is the
/// first right singular vector of `V`; its sign is arbitrary.
///
/// Power iteration starts from the Gram column with the largest diagonal and
/// stops when successive iterates differ by at most [`POWER_TOL`] in L2 norm.
pub fn principal_direction<T: Scalar>(acts: &ActivationStack<T>) -> Result<Vec<T>> {
    let s = acts.channels();
    let plane = acts.height() * acts.width();
    let v = acts.values().data();

    let mut gram = vec![T::zero(); s * s];
    for i in 0..s {
        let ci = &v[i * plane..(i + 1) * plane];
        for j in i..s {
            let cj = &v[j * plane..(j + 1) * plane];
            let d: T = ci.iter().zip(cj).map(|(&a, &b)| a * b).sum();
            gram[i * s + j] = d;
            gram[j * s + i] = d;
        }
    }

    let start = (0..s)
        .max_by(|&a, &b| gram[a * s + a].partial_cmp(&gram[b * s + b]).expect("finite"))
        .expect("at least one channel");
    if gram[start * s + start] == T::zero() {
        return Err(Error::DegenerateInput("activation stack is all zeros".into()));
    }

    let mat_vec = |u: &[T]| -> Vec<T> {
        (0..s)
            .map(|i| gram[i * s..(i + 1) * s].iter().zip(u).map(|(&g, &x)| g * x).sum())
            .collect()
    };
    let normalize = |u: &mut Vec<T>| -> bool {
        let n = u.iter().map(|&x| x * x).sum::<T>().sqrt();
        if n == T::zero() {
            return false;
        }
        u.iter_mut().for_each(|x| *x /= n);
        true
    };

    let mut u: Vec<T> = gram[start * s..(start + 1) * s].to_vec();
    if !normalize(&mut u) {
        return Err(Error::DegenerateInput("activation stack is all zeros".into()));
    }
    let tol = T::of(POWER_TOL);
    for _ in 0..POWER_MAX_ITERS {
        let mut next = mat_vec(&u);
        if !normalize(&mut next) {
            return Err(Error::DegenerateInput("Gram matrix annihilates the start vector".into()));
        }
        let delta = next
            .iter()
            .zip(&u)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<T>()
            .sqrt();
        u = next;
        if delta <= tol {
            break;
        }
    }
    Ok(u)
}

/// Eigen-CAM: absolute value of the activations projected onto their first
/// principal direction, resized and normalized to `[0, 1]`.
pub fn eigen_cam_map<T: Scalar>(
    acts: &ActivationStack<T>,
    out_h: usize,
    out_w: usize,
) -> Result<SaliencyMap<T>> {
    let u = principal_direction(acts)?;
    let (h, w) = (acts.height(), acts.width());
    let plane = h * w;
    let v = acts.values().data();
    let proj = (0..plane)
        .map(|p| {
            u.iter()
                .enumerate()
                .map(|(c, &uc)| v[c * plane + p] * uc)
                .sum::<T>()
                .abs()
        })
        .collect();
    let proj = Tensor::from_vec([h, w], proj)?;
    let resized = resize_bilinear(&proj, out_h, out_w)?;
    SaliencyMap::new(minmax_normalize(&resized))
}
