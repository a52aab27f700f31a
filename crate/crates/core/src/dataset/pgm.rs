//! Binary PGM (`P5`, maxval 255) reading and writing.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::ImageGrid;

/// Decode a binary 8-bit PGM. Comments (`#` to end of line) are accepted
/// anywhere in the header.
pub fn decode_pgm(bytes: &[u8]) -> Result<ImageGrid> {
    let mut pos = 0;
    let magic = next_token(bytes, &mut pos)?;
    if magic != "P5" {
        return Err(Error::PgmMagic(magic));
    }
    let width = parse_dim(&next_token(bytes, &mut pos)?, "width")?;
    let height = parse_dim(&next_token(bytes, &mut pos)?, "height")?;
    let maxval_tok = next_token(bytes, &mut pos)?;
    let maxval: u32 = maxval_tok
        .parse()
        .map_err(|_| Error::PgmHeader(format!("bad maxval {maxval_tok:?}")))?;
    if maxval != 255 {
        return Err(Error::PgmMaxval(maxval));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::PgmHeader("missing whitespace after maxval".into())),
    }
    let expected = width * height;
    let raster = &bytes[pos..];
    if raster.len() < expected {
        return Err(Error::PgmTruncated {
            expected,
            found: raster.len(),
        });
    }
    ImageGrid::new(height, width, raster[..expected].iter().map(|&b| b as f64).collect())
}

fn parse_dim(tok: &str, what: &str) -> Result<usize> {
    match tok.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(Error::PgmHeader(format!("bad {what} {tok:?}"))),
    }
}

fn next_token(bytes: &[u8], pos: &mut usize) -> Result<String> {
    loop {
        match bytes.get(*pos) {
            None => return Err(Error::PgmHeader("unexpected end of header".into())),
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' || b == b'\r' {
                        break;
                    }
                }
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
        }
    }
    let start = *pos;
    while let Some(&b) = bytes.get(*pos) {
        if b.is_ascii_whitespace() || b == b'#' {
            break;
        }
        *pos += 1;
    }
    Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

pub fn encode_pgm(grid: &ImageGrid) -> Result<Vec<u8>> {
    let mut out = format!("P5\n{} {}\n255\n", grid.width(), grid.height()).into_bytes();
    out.reserve(grid.len());
    for (i, &v) in grid.values().iter().enumerate() {
        if !(0.0..=255.0).contains(&v) || v.fract() != 0.0 {
            return Err(Error::CoverRange { index: i, value: v });
        }
        out.push(v as u8);
    }
    Ok(out)
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<ImageGrid> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes)
}

pub fn save_pgm(grid: &ImageGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(grid)?).map_err(|e| Error::io(path, e))
}
