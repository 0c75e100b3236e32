//! Reading and writing the numpy `.npy` format.
//!
//! Only little-endian float64 (`'<f8'`) in C order is supported. Files are
//! always written as version 1.0; versions 2.0 and 3.0 are accepted on read
//! since they differ only in the width of the header length field.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: [u8; 6] = *b"\x93NUMPY";
const ALIGN: usize = 64;

/// Reads a tensor from an `.npy` file.
pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor<f64>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_npy(&mut BufReader::new(file))
}

/// Writes a tensor as an `.npy` v1.0 file.
pub fn write_tensor(t: &Tensor<f64>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_npy(t, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Header dictionary text, padded so that the payload starts on a 64-byte
/// boundary.
pub fn header_bytes(shape: &[usize]) -> Vec<u8> {
    let dims = match shape {
        [d] => format!("({d},)"),
        _ => format!(
            "({})",
            shape
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        ),
    };
    let mut dict = format!("{{'descr': '<f8', 'fortran_order': False, 'shape': {dims}, }}");
    // magic(6) + version(2) + header length(2) + dict + '\n'
    let unpadded = MAGIC.len() + 4 + dict.len() + 1;
    let pad = (ALIGN - unpadded % ALIGN) % ALIGN;
    dict.extend(std::iter::repeat_n(' ', pad));
    dict.push('\n');

    let mut out = Vec::with_capacity(MAGIC.len() + 4 + dict.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(dict.len() as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out
}

pub fn write_npy<W: Write>(t: &Tensor<f64>, w: &mut W) -> io::Result<()> {
    w.write_all(&header_bytes(t.shape()))?;
    for v in t.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_exact_or_format<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => Error::Format(format!("truncated {what}")),
        _ => Error::Format(format!("reading {what}: {e}")),
    })
}

pub fn read_npy<R: Read>(r: &mut R) -> Result<Tensor<f64>> {
    let mut magic = [0u8; 6];
    read_exact_or_format(r, &mut magic, "magic")?;
    if magic != MAGIC {
        return Err(Error::Format("not an npy file (bad magic)".into()));
    }
    let mut version = [0u8; 2];
    read_exact_or_format(r, &mut version, "version")?;
    let header_len = match version[0] {
        1 => {
            let mut b = [0u8; 2];
            read_exact_or_format(r, &mut b, "header length")?;
            u16::from_le_bytes(b) as usize
        }
        2 | 3 => {
            let mut b = [0u8; 4];
            read_exact_or_format(r, &mut b, "header length")?;
            u32::from_le_bytes(b) as usize
        }
        v => return Err(Error::Format(format!("unsupported npy version {v}.{}", version[1]))),
    };
    let mut header = vec![0u8; header_len];
    read_exact_or_format(r, &mut header, "header")?;
    let header = std::str::from_utf8(&header)
        .map_err(|_| Error::Format("header is not valid text".into()))?;
    let dict = HeaderDict::parse(header)?;

    if dict.descr != "<f8" {
        return Err(Error::UnsupportedDtype(dict.descr));
    }
    if dict.fortran_order {
        return Err(Error::UnsupportedFormat(
            "fortran_order arrays are not supported".into(),
        ));
    }
    let count = dict
        .shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Format("shape overflows".into()))?;

    let mut payload = vec![0u8; count * 8];
    read_exact_or_format(r, &mut payload, "payload")?;
    let mut trailing = [0u8; 1];
    match r.read(&mut trailing) {
        Ok(0) => {}
        Ok(_) => return Err(Error::Format("trailing bytes after payload".into())),
        Err(e) => return Err(Error::Format(format!("reading payload: {e}"))),
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Tensor::from_vec(dict.shape, data)
}

#[derive(Debug)]
struct HeaderDict {
    descr: String,
    fortran_order: bool,
    shape: Vec<usize>,
}

impl HeaderDict {
    /// Parses the python-literal dict numpy writes, e.g.
    /// `{'descr': '<f8', 'fortran_order': False, 'shape': (2, 3), }`.
    fn parse(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Format(format!("npy header: {msg}"));
        let body = text
            .trim()
            .strip_prefix('{')
            .and_then(|s| s.strip_suffix('}'))
            .ok_or_else(|| bad("not a dict"))?;

        let mut descr = None;
        let mut fortran_order = None;
        let mut shape = None;
        let mut rest = body.trim_start();
        while !rest.is_empty() {
            let (key, after) = parse_quoted(rest).ok_or_else(|| bad("expected quoted key"))?;
            let after = after
                .trim_start()
                .strip_prefix(':')
                .ok_or_else(|| bad("expected ':'"))?
                .trim_start();
            let after = match key {
                "descr" => {
                    let (v, a) = parse_quoted(after).ok_or_else(|| bad("descr must be a string"))?;
                    descr = Some(v.to_string());
                    a
                }
                "fortran_order" => {
                    if let Some(a) = after.strip_prefix("False") {
                        fortran_order = Some(false);
                        a
                    } else if let Some(a) = after.strip_prefix("True") {
                        fortran_order = Some(true);
                        a
                    } else {
                        return Err(bad("fortran_order must be True or False"));
                    }
                }
                "shape" => {
                    let inner = after.strip_prefix('(').ok_or_else(|| bad("shape must be a tuple"))?;
                    let close = inner.find(')').ok_or_else(|| bad("unterminated shape"))?;
                    let dims = inner[..close]
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| s.parse::<usize>().map_err(|_| bad("shape entry is not an integer")))
                        .collect::<Result<Vec<_>>>()?;
                    shape = Some(dims);
                    &inner[close + 1..]
                }
                other => return Err(bad(&format!("unexpected key {other:?}"))),
            };
            let after = after.trim_start();
            rest = after.strip_prefix(',').unwrap_or(after).trim_start();
            if !rest.is_empty() && !rest.starts_with('\'') && !rest.starts_with('"') {
                return Err(bad("trailing garbage"));
            }
        }
        Ok(HeaderDict {
            descr: descr.ok_or_else(|| bad("missing 'descr'"))?,
            fortran_order: fortran_order.ok_or_else(|| bad("missing 'fortran_order'"))?,
            shape: shape.ok_or_else(|| bad("missing 'shape'"))?,
        })
    }
}

fn parse_quoted(s: &str) -> Option<(&str, &str)> {
    let quote = s.chars().next().filter(|&c| c == '\'' || c == '"')?;
    let end = s[1..].find(quote)? + 1;
    Some((&s[1..end], &s[end + 1..]))
}
