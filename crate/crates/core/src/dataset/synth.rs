//! Procedural grayscale covers.
//!
//! Each image combines a smooth background (a linear gradient plus one
//! low-frequency wave), a texture layer of pixel noise whose strength varies
//! smoothly across the image and from image to image, and a few perfectly
//! flat rectangular patches. The result is rounded and clamped to 8 bits.
//!
//! The default style is bright: the background level often exceeds 255, so a
//! large, image-dependent part of every frame clips to pure white, much like
//! blown highlights in an overexposed photograph.

use rayon::prelude::*;

use crate::rng::{SplitMix64, Stream};
use crate::tensor::ImageGrid;

/// Smallest supported side length.
pub const MIN_SIZE: usize = 8;

/// Knobs of the procedural cover generator. Ranges are sampled uniformly
/// per image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverStyle {
    /// Background level at the image centre; values above 255 clip.
    pub level: (f64, f64),
    /// Total rise of the linear gradient across the image, in intensity units.
    pub gradient: (f64, f64),
    /// Amplitude of the low-frequency wave.
    pub wave: (f64, f64),
    /// Per-image standard deviation of the pixel noise (before the spatial ramp).
    pub noise: (f64, f64),
    /// Maximum number of flat rectangular patches (at least one is drawn).
    pub max_patches: usize,
}

impl Default for CoverStyle {
    fn default() -> Self {
        CoverStyle {
            level: (220.0, 340.0),
            gradient: (200.0, 400.0),
            wave: (0.0, 20.0),
            noise: (1.0, 4.0),
            max_patches: 3,
        }
    }
}

/// `count` covers of `size x size` pixels in the default style. Image `i`
/// depends only on `(seed, i, size)`.
///
/// # Panics
/// If `size < MIN_SIZE`.
pub fn synth_covers(seed: u64, count: usize, size: usize) -> Vec<ImageGrid> {
    synth_covers_with(seed, count, size, &CoverStyle::default())
}

pub fn synth_covers_with(seed: u64, count: usize, size: usize, style: &CoverStyle) -> Vec<ImageGrid> {
    assert!(size >= MIN_SIZE, "cover side must be at least {MIN_SIZE}");
    (0..count)
        .into_par_iter()
        .map(|i| synth_cover_with(seed, i as u64, size, style))
        .collect()
}

pub fn synth_cover(seed: u64, index: u64, size: usize) -> ImageGrid {
    synth_cover_with(seed, index, size, &CoverStyle::default())
}

pub fn synth_cover_with(seed: u64, index: u64, size: usize, style: &CoverStyle) -> ImageGrid {
    use std::f64::consts::{PI, TAU};
    let mut rng = SplitMix64::derive(seed, Stream::Cover, index);
    let n = size as f64;
    let mut draw = |r: (f64, f64)| rng.uniform(r.0, r.1);

    let level = draw(style.level);
    let slope = draw(style.gradient) / n;
    let dir = draw((0.0, TAU));
    let (gx, gy) = (slope * dir.cos(), slope * dir.sin());
    let wave_amp = draw(style.wave);
    let wave_len = draw((0.6, 2.0)) * n;
    let wave_dir = draw((0.0, TAU));
    let wave_phase = draw((0.0, TAU));
    let (wx, wy) = (wave_dir.cos() / wave_len, wave_dir.sin() / wave_len);
    // Texture strength: the per-image scale times a smooth ramp in [0.2, 1].
    let sigma = draw(style.noise);
    let tex_dir = draw((0.0, TAU));
    let (tx, ty) = (tex_dir.cos() / n, tex_dir.sin() / n);

    let mut img = ImageGrid::from_fn(size, size, |i, j| {
        let (y, x) = (i as f64 - n / 2.0, j as f64 - n / 2.0);
        let base = level + gx * x + gy * y + wave_amp * (TAU * (wx * x + wy * y) + wave_phase).sin();
        let ramp = 0.6 + 0.4 * (PI * (tx * x + ty * y)).sin();
        base + sigma * ramp * rng.normal()
    });

    let patches = rng.below(style.max_patches.max(1) as u64) as usize + 1;
    for _ in 0..patches {
        let ph = size / 8 + rng.below((size / 3) as u64) as usize;
        let pw = size / 8 + rng.below((size / 3) as u64) as usize;
        let r0 = rng.below((size - ph + 1) as u64) as usize;
        let c0 = rng.below((size - pw + 1) as u64) as usize;
        let value = img.get(r0 + ph / 2, c0 + pw / 2);
        for r in r0..r0 + ph {
            for c in c0..c0 + pw {
                img.set(r, c, value);
            }
        }
    }

    for v in img.values_mut() {
        *v = v.round().clamp(0.0, 255.0);
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stego::adaptive_costs;

    #[test]
    fn deterministic() {
        assert_eq!(synth_covers(1, 2, 16), synth_covers(1, 2, 16));
        assert_ne!(synth_covers(1, 2, 16), synth_covers(2, 2, 16));
    }

    #[test]
    fn integer_valued_8bit() {
        for img in synth_covers(3, 20, 32) {
            assert!(img
                .values()
                .iter()
                .all(|v| (0.0..=255.0).contains(v) && v.fract() == 0.0));
        }
    }

    #[test]
    fn intensity_spread() {
        let mut seen = [false; 256];
        for img in synth_covers(4, 1000, 32) {
            for &v in img.values() {
                seen[v as usize] = true;
            }
        }
        assert!(seen.iter().filter(|&&s| s).count() >= 200);
    }

    #[test]
    fn smooth_and_textured_regions_coexist() {
        for img in synth_covers(5, 50, 32) {
            // costs are 1 / (var + eps): max cost over min cost == max var ratio.
            let costs = adaptive_costs(&img);
            let (lo, hi) = costs
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), &c| (lo.min(c), hi.max(c)));
            assert!(hi / lo > 10.0);
        }
    }
}
