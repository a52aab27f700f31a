//! Embedding simulators that turn covers into stego images.
//!
//! Three schemes are provided, all driven by a key-derived visiting order and
//! an independent message stream:
//!
//! * [`Algorithm::LsbMatching`]: visit the first `ceil(alpha * pixels)`
//!   positions of the key permutation and apply ±1 LSB matching.
//! * [`Algorithm::AdaptiveCost`]: same change rule, but visit the pixels with
//!   the lowest cost, where cost is the inverse local 3x3 variance (textured
//!   areas are cheap, smooth areas expensive). Ties follow key order.
//! * [`Algorithm::DctLsb`]: JPEG-like 8x8 block DCT at quality 75, LSB
//!   matching on `ceil(alpha * nonzero AC)` quantized AC coefficients.
//!
//! No matrix/syndrome coding is applied, so about half of the visited
//! positions change.

mod dct;
mod spatial;

pub use dct::{dct_8x8, embed_dct, idct_8x8, jpeg_recompress, quant_table, DctImage, BLOCK, LUMINANCE_QUANT, QUALITY};
pub use spatial::{adaptive_costs, embed_adaptive, embed_lsb_matching, extract_lsb, COST_EPSILON};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{SplitMix64, Stream};
use crate::tensor::ImageGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    LsbMatching,
    AdaptiveCost,
    DctLsb,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::LsbMatching => "lsb_matching",
            Algorithm::AdaptiveCost => "adaptive_cost",
            Algorithm::DctLsb => "dct_lsb",
        }
    }

    pub fn is_spatial(self) -> bool {
        !matches!(self, Algorithm::DctLsb)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lsb_matching" => Ok(Algorithm::LsbMatching),
            "adaptive_cost" => Ok(Algorithm::AdaptiveCost),
            "dct_lsb" => Ok(Algorithm::DctLsb),
            _ => Err(Error::InvalidValue(format!(
                "unknown algorithm {s:?} (expected lsb_matching, adaptive_cost or dct_lsb)"
            ))),
        }
    }
}

/// How the embedding key is chosen for each image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyMode {
    /// One key for every image.
    Fixed { seed: u64 },
    /// A fresh key per image, derived from a master seed and the image index.
    PerImage { master_seed: u64 },
}

impl std::fmt::Display for KeyMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KeyMode::Fixed { seed } => write!(f, "fixed:{seed}"),
            KeyMode::PerImage { master_seed } => write!(f, "per_image:{master_seed}"),
        }
    }
}

impl std::str::FromStr for KeyMode {
    type Err = Error;

    /// `fixed:<seed>` or `per_image:<master_seed>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidValue(format!("key mode {s:?} must be fixed:<seed> or per_image:<seed>"));
        let (kind, seed) = s.split_once(':').ok_or_else(bad)?;
        let seed: u64 = seed.trim().parse().map_err(|_| bad())?;
        match kind.trim() {
            "fixed" => Ok(KeyMode::Fixed { seed }),
            "per_image" => Ok(KeyMode::PerImage { master_seed: seed }),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StegoConfig {
    pub algorithm: Algorithm,
    /// Bits per pixel for spatial schemes, bits per non-zero AC coefficient
    /// for `dct_lsb`.
    pub payload: f64,
    pub key_mode: KeyMode,
    pub message_seed: u64,
    /// Index of the image being embedded; selects the per-image key and the
    /// message stream.
    #[serde(default)]
    pub image_index: u64,
}

impl StegoConfig {
    pub fn new(algorithm: Algorithm, payload: f64, key_mode: KeyMode, message_seed: u64) -> Result<Self> {
        let cfg = StegoConfig {
            algorithm,
            payload,
            key_mode,
            message_seed,
            image_index: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.payload) {
            return Err(Error::InvalidValue(format!(
                "payload must lie in [0, 1], got {}",
                self.payload
            )));
        }
        Ok(())
    }

    pub fn for_image(mut self, index: u64) -> Self {
        self.image_index = index;
        self
    }

    pub fn with_payload(mut self, payload: f64) -> Self {
        self.payload = payload;
        self
    }

    /// Generator behind the visiting order of the current image.
    pub fn key_rng(&self) -> SplitMix64 {
        match self.key_mode {
            KeyMode::Fixed { seed } => SplitMix64::derive(seed, Stream::Key, 0),
            KeyMode::PerImage { master_seed } => SplitMix64::derive(master_seed, Stream::Key, self.image_index),
        }
    }

    pub fn message_rng(&self) -> SplitMix64 {
        SplitMix64::derive(self.message_seed, Stream::Message, self.image_index)
    }

    /// Key permutation of `0..n`.
    pub fn key_permutation(&self, n: usize) -> Vec<usize> {
        self.key_rng().permutation(n)
    }

    /// `ceil(payload * n)`.
    pub fn visit_count(&self, n: usize) -> usize {
        // The epsilon keeps exact products such as 0.1 * 1000 from rounding up.
        let c = (self.payload * n as f64 - 1e-9).ceil().max(0.0) as usize;
        c.min(n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedResult {
    /// Integer-valued stego image in `[0, 255]`.
    pub stego: ImageGrid,
    pub modified_count: usize,
    /// Visited positions in visiting order: pixel indices for spatial
    /// schemes, `block * 64 + coefficient` indices for `dct_lsb`.
    pub visited: Vec<usize>,
    /// Message bit embedded at each visited position.
    pub message: Vec<u8>,
}

impl EmbedResult {
    pub fn positions_used(&self) -> usize {
        self.visited.len()
    }
}

pub fn embed(cover: &ImageGrid, cfg: &StegoConfig) -> Result<EmbedResult> {
    match cfg.algorithm {
        Algorithm::LsbMatching => embed_lsb_matching(cover, cfg),
        Algorithm::AdaptiveCost => embed_adaptive(cover, cfg),
        Algorithm::DctLsb => embed_dct(cover, cfg),
    }
}

/// Number of coordinates at which two equally sized grids differ.
pub fn count_modified(cover: &ImageGrid, stego: &ImageGrid) -> Result<usize> {
    if cover.dims() != stego.dims() {
        return Err(Error::Shape(format!(
            "cannot compare {}x{} with {}x{}",
            cover.height(),
            cover.width(),
            stego.height(),
            stego.width()
        )));
    }
    Ok(cover
        .values()
        .iter()
        .zip(stego.values())
        .filter(|(a, b)| a != b)
        .count())
}

/// Reject anything that is not an 8-bit integer image.
pub(crate) fn check_cover(cover: &ImageGrid) -> Result<()> {
    match cover
        .values()
        .iter()
        .position(|&v| !(0.0..=255.0).contains(&v) || v.fract() != 0.0)
    {
        Some(index) => Err(Error::CoverRange {
            index,
            value: cover.values()[index],
        }),
        None => Ok(()),
    }
}

/// One draw of the message stream: the bit to embed and the direction to use
/// if the carrier has to change.
#[inline]
pub(crate) fn next_symbol(rng: &mut SplitMix64) -> (u8, bool) {
    let r = rng.next_u64();
    ((r >> 63) as u8, (r >> 62) & 1 == 1)
}
