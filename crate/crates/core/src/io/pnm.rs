//! Binary netpbm images: PGM (P5) in and out, PPM (P6) out.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Reads an 8-bit binary PGM into a `[height, width]` tensor scaled to `[0, 1]`.
pub fn read_gray_image(path: impl AsRef<Path>) -> Result<Tensor<f64>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes)
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Tensor<f64>> {
    let mut cur = HeaderCursor { bytes, pos: 0 };
    let magic = cur.token()?;
    if magic != b"P5" {
        return Err(Error::Format(format!(
            "expected binary PGM magic P5, found {:?}",
            String::from_utf8_lossy(magic)
        )));
    }
    let width = cur.number()?;
    let height = cur.number()?;
    let maxval = cur.number()?;
    if maxval != 255 {
        return Err(Error::UnsupportedFormat(format!(
            "PGM maxval {maxval}, only 255 is supported"
        )));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(Error::Format("missing separator before PGM raster".into())),
    }
    let raster = &bytes[cur.pos..];
    let count = width * height;
    if raster.len() < count {
        return Err(Error::Format(format!(
            "PGM raster truncated: need {count} bytes, have {}",
            raster.len()
        )));
    }
    let data = raster[..count].iter().map(|&p| f64::from(p) / 255.0).collect();
    Tensor::from_vec([height, width], data)
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() || b == b'#' {
                break;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Format("truncated PGM header".into()));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self) -> Result<usize> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .filter(|&n| n > 0)
            .ok_or_else(|| {
                Error::Format(format!(
                    "bad PGM header field {:?}",
                    String::from_utf8_lossy(tok)
                ))
            })
    }
}

/// Quantizes a value in `[0, 1]` to a byte with round-half-up; values outside
/// the range saturate.
#[inline]
pub fn quantize<T: Scalar>(v: T) -> u8 {
    let scaled = (v.as_f64() * 255.0 + 0.5).floor();
    scaled.clamp(0.0, 255.0) as u8
}

pub fn encode_pgm<T: Scalar>(img: &Tensor<T>) -> Result<Vec<u8>> {
    let (h, w) = img.dims2()?;
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(img.data().iter().map(|&v| quantize(v)));
    Ok(out)
}

/// Writes a rank-2 tensor with values in `[0, 1]` as an 8-bit PGM.
pub fn write_gray_image<T: Scalar>(img: &Tensor<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(img)?).map_err(|e| Error::io(path, e))
}

pub fn encode_ppm<T: Scalar>(rgb: &Tensor<T>) -> Result<Vec<u8>> {
    let (h, w, c) = rgb.dims3()?;
    if c != 3 {
        return Err(Error::InvalidShape(format!(
            "PPM needs [height, width, 3], got {:?}",
            rgb.shape()
        )));
    }
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.extend(rgb.data().iter().map(|&v| quantize(v)));
    Ok(out)
}

/// Writes a `[height, width, 3]` tensor with values in `[0, 1]` as a binary PPM.
pub fn write_rgb_image<T: Scalar>(rgb: &Tensor<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_ppm(rgb)?).map_err(|e| Error::io(path, e))
}
