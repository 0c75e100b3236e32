//! File formats: `.npy` tensors and binary netpbm images.

pub mod npy;
pub mod pnm;

pub use npy::{read_tensor, write_tensor};
pub use pnm::{read_gray_image, write_gray_image, write_rgb_image};
