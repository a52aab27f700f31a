//! JPEG-like block transform used by the frequency-domain embedder.

use crate::error::{Error, Result};
use crate::tensor::ImageGrid;

use super::{check_cover, next_symbol, EmbedResult, StegoConfig};

pub const BLOCK: usize = 8;
pub const QUALITY: u32 = 75;

/// Standard JPEG luminance quantization table (quality 50), row-major.
#[rustfmt::skip]
pub const LUMINANCE_QUANT: [u16; 64] = [
    16, 11, 10, 16,  24,  40,  51,  61,
    12, 12, 14, 19,  26,  58,  60,  55,
    14, 13, 16, 24,  40,  57,  69,  56,
    14, 17, 22, 29,  51,  87,  80,  62,
    18, 22, 37, 56,  68, 109, 103,  77,
    24, 35, 55, 64,  81, 104, 113,  92,
    49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103,  99,
];

/// Luminance table scaled to `quality` with the usual IJG rule.
pub fn quant_table(quality: u32) -> [f64; 64] {
    let q = quality.clamp(1, 100);
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    let mut t = [0.0; 64];
    for (dst, &base) in t.iter_mut().zip(&LUMINANCE_QUANT) {
        *dst = ((base as u32 * scale + 50) / 100).clamp(1, 255) as f64;
    }
    t
}

fn basis() -> [[f64; BLOCK]; BLOCK] {
    let mut c = [[0.0; BLOCK]; BLOCK];
    for (u, row) in c.iter_mut().enumerate() {
        let a = if u == 0 { (1.0 / 8.0f64).sqrt() } else { 0.5 };
        for (x, v) in row.iter_mut().enumerate() {
            *v = a * (((2 * x + 1) * u) as f64 * std::f64::consts::PI / 16.0).cos();
        }
    }
    c
}

/// Orthonormal 2D DCT-II of one 8x8 block (row-major).
pub fn dct_8x8(block: &[f64; 64]) -> [f64; 64] {
    let c = basis();
    let mut tmp = [0.0; 64];
    // rows: tmp = X C^T
    for i in 0..BLOCK {
        for v in 0..BLOCK {
            tmp[i * BLOCK + v] = (0..BLOCK).map(|j| block[i * BLOCK + j] * c[v][j]).sum();
        }
    }
    let mut out = [0.0; 64];
    for u in 0..BLOCK {
        for v in 0..BLOCK {
            out[u * BLOCK + v] = (0..BLOCK).map(|i| c[u][i] * tmp[i * BLOCK + v]).sum();
        }
    }
    out
}

pub fn idct_8x8(coef: &[f64; 64]) -> [f64; 64] {
    let c = basis();
    let mut tmp = [0.0; 64];
    for u in 0..BLOCK {
        for j in 0..BLOCK {
            tmp[u * BLOCK + j] = (0..BLOCK).map(|v| coef[u * BLOCK + v] * c[v][j]).sum();
        }
    }
    let mut out = [0.0; 64];
    for i in 0..BLOCK {
        for j in 0..BLOCK {
            out[i * BLOCK + j] = (0..BLOCK).map(|u| c[u][i] * tmp[u * BLOCK + j]).sum();
        }
    }
    out
}

/// Quantized block-DCT coefficients of an image; `coef[b * 64 + k]` is
/// coefficient `k` (row-major inside the block) of block `b` (raster order).
#[derive(Debug, Clone, PartialEq)]
pub struct DctImage {
    pub height: usize,
    pub width: usize,
    pub coef: Vec<i32>,
}

impl DctImage {
    pub fn from_pixels(img: &ImageGrid, quality: u32) -> Result<Self> {
        let (h, w) = img.dims();
        if h % BLOCK != 0 || w % BLOCK != 0 {
            return Err(Error::Shape(format!(
                "block DCT needs sides divisible by {BLOCK}, got {h}x{w}"
            )));
        }
        let q = quant_table(quality);
        let mut coef = Vec::with_capacity(h * w);
        for bi in (0..h).step_by(BLOCK) {
            for bj in (0..w).step_by(BLOCK) {
                let mut block = [0.0; 64];
                for (k, v) in block.iter_mut().enumerate() {
                    *v = img.get(bi + k / BLOCK, bj + k % BLOCK) - 128.0;
                }
                let d = dct_8x8(&block);
                coef.extend(d.iter().zip(&q).map(|(c, q)| (c / q).round() as i32));
            }
        }
        Ok(DctImage {
            height: h,
            width: w,
            coef,
        })
    }

    /// Dequantize, inverse transform, round and clamp to `[0, 255]`.
    pub fn to_pixels(&self, quality: u32) -> ImageGrid {
        let q = quant_table(quality);
        let blocks_per_row = self.width / BLOCK;
        let mut img = ImageGrid::zeros(self.height, self.width);
        for (b, chunk) in self.coef.chunks_exact(64).enumerate() {
            let mut d = [0.0; 64];
            for k in 0..64 {
                d[k] = chunk[k] as f64 * q[k];
            }
            let px = idct_8x8(&d);
            let (bi, bj) = ((b / blocks_per_row) * BLOCK, (b % blocks_per_row) * BLOCK);
            for (k, v) in px.iter().enumerate() {
                img.set(bi + k / BLOCK, bj + k % BLOCK, (v + 128.0).round().clamp(0.0, 255.0));
            }
        }
        img
    }

    /// Indices of non-zero AC coefficients, in storage order.
    pub fn nonzero_ac(&self) -> Vec<usize> {
        self.coef
            .iter()
            .enumerate()
            .filter(|&(i, &c)| i % 64 != 0 && c != 0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// The cover after one quality-75 compression round trip.
pub fn jpeg_recompress(cover: &ImageGrid) -> Result<ImageGrid> {
    Ok(DctImage::from_pixels(cover, QUALITY)?.to_pixels(QUALITY))
}

/// LSB matching on quantized AC coefficients. Coefficients never cross or
/// reach zero: `±1` only moves outward to `±2`. `modified_count` counts
/// pixels that differ from the plain recompressed cover.
pub fn embed_dct(cover: &ImageGrid, cfg: &StegoConfig) -> Result<EmbedResult> {
    cfg.validate()?;
    check_cover(cover)?;
    let mut dct = DctImage::from_pixels(cover, QUALITY)?;
    let baseline = dct.to_pixels(QUALITY);
    let mut candidates = dct.nonzero_ac();
    let visit = cfg.visit_count(candidates.len());
    cfg.key_rng().shuffle(&mut candidates);
    candidates.truncate(visit);

    let mut rng = cfg.message_rng();
    let mut message = Vec::with_capacity(visit);
    for &i in &candidates {
        let (bit, up) = next_symbol(&mut rng);
        message.push(bit);
        let c = dct.coef[i];
        if c.rem_euclid(2) as u8 != bit {
            dct.coef[i] = match c {
                1 => 2,
                -1 => -2,
                _ if up => c + 1,
                _ => c - 1,
            };
        }
    }
    let stego = dct.to_pixels(QUALITY);
    let modified_count = super::count_modified(&baseline, &stego)?;
    Ok(EmbedResult {
        stego,
        modified_count,
        visited: candidates,
        message,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use crate::stego::{Algorithm, KeyMode};

    #[test]
    fn quality_75_table() {
        let t = quant_table(75);
        assert_eq!(&t[..8], &[8.0, 6.0, 5.0, 8.0, 12.0, 20.0, 26.0, 31.0]);
        assert_eq!(t[63], 50.0);
        assert_eq!(quant_table(50)[0], 16.0);
    }

    #[test]
    fn dct_round_trip() {
        let mut rng = SplitMix64::new(3);
        let mut block = [0.0; 64];
        for v in &mut block {
            *v = rng.uniform(-128.0, 128.0);
        }
        let back = idct_8x8(&dct_8x8(&block));
        for (a, b) in block.iter().zip(&back) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn dct_of_constant_is_dc_only() {
        let d = dct_8x8(&[10.0; 64]);
        assert!((d[0] - 80.0).abs() < 1e-12);
        assert!(d[1..].iter().all(|c| c.abs() < 1e-12));
    }

    fn textured(seed: u64, n: usize) -> ImageGrid {
        let mut rng = SplitMix64::new(seed);
        ImageGrid::from_fn(n, n, |i, j| {
            (100.0 + 40.0 * ((i + j) as f64 / 5.0).sin() + rng.uniform(-20.0, 20.0)).round()
        })
    }

    #[test]
    fn zero_payload_equals_recompression() {
        let cover = textured(1, 32);
        let cfg = StegoConfig::new(Algorithm::DctLsb, 0.0, KeyMode::Fixed { seed: 1 }, 2).unwrap();
        let r = embed_dct(&cover, &cfg).unwrap();
        assert_eq!(r.stego, jpeg_recompress(&cover).unwrap());
        assert_eq!(r.modified_count, 0);
    }

    #[test]
    fn side_must_be_multiple_of_8() {
        let cfg = StegoConfig::new(Algorithm::DctLsb, 0.5, KeyMode::Fixed { seed: 1 }, 2).unwrap();
        assert!(matches!(
            embed_dct(&ImageGrid::filled(12, 16, 3.0), &cfg),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn coefficients_keep_their_support() {
        let cover = textured(5, 32);
        let cfg = StegoConfig::new(Algorithm::DctLsb, 1.0, KeyMode::Fixed { seed: 9 }, 4).unwrap();
        let before = DctImage::from_pixels(&cover, QUALITY).unwrap();
        let r = embed_dct(&cover, &cfg).unwrap();
        assert_eq!(r.positions_used(), before.nonzero_ac().len());
        // Re-derive the modified coefficients directly.
        let mut after = before.clone();
        let mut rng = cfg.message_rng();
        for &i in &r.visited {
            let (bit, up) = next_symbol(&mut rng);
            let c = after.coef[i];
            if c.rem_euclid(2) as u8 != bit {
                after.coef[i] = if c.abs() == 1 {
                    2 * c
                } else if up {
                    c + 1
                } else {
                    c - 1
                };
            }
        }
        assert_eq!(after.nonzero_ac(), before.nonzero_ac());
        for (&i, &bit) in r.visited.iter().zip(&r.message) {
            assert_eq!(after.coef[i].rem_euclid(2) as u8, bit);
        }
        assert_eq!(after.to_pixels(QUALITY), r.stego);
        assert!(r
            .stego
            .values()
            .iter()
            .all(|v| (0.0..=255.0).contains(v) && v.fract() == 0.0));
    }
}
