use crate::error::Result;
use crate::tensor::ImageGrid;

use super::{check_cover, next_symbol, EmbedResult, StegoConfig};

/// Added to the local variance before inverting it into a cost.
pub const COST_EPSILON: f64 = 1e-6;

/// ±1 LSB matching over `order`, in order. Clamped at the range ends.
fn lsb_match(cover: &ImageGrid, order: Vec<usize>, cfg: &StegoConfig) -> EmbedResult {
    let mut stego = cover.clone();
    let mut rng = cfg.message_rng();
    let mut message = Vec::with_capacity(order.len());
    let mut modified = 0;
    let px = stego.values_mut();
    for &pos in &order {
        let (bit, up) = next_symbol(&mut rng);
        message.push(bit);
        let v = px[pos];
        if (v as u8 & 1) != bit {
            px[pos] = if v == 0.0 {
                1.0
            } else if v == 255.0 || !up {
                v - 1.0
            } else {
                v + 1.0
            };
            modified += 1;
        }
    }
    EmbedResult {
        stego,
        modified_count: modified,
        visited: order,
        message,
    }
}

pub fn embed_lsb_matching(cover: &ImageGrid, cfg: &StegoConfig) -> Result<EmbedResult> {
    cfg.validate()?;
    check_cover(cover)?;
    let n = cover.len();
    let mut order = cfg.key_permutation(n);
    order.truncate(cfg.visit_count(n));
    Ok(lsb_match(cover, order, cfg))
}

/// Per-pixel embedding cost: `1 / (var + eps)` with `var` the population
/// variance of the 3x3 neighbourhood, clipped at the image border.
pub fn adaptive_costs(cover: &ImageGrid) -> Vec<f64> {
    let (h, w) = cover.dims();
    let mut costs = Vec::with_capacity(h * w);
    for i in 0..h {
        for j in 0..w {
            let (mut s, mut s2, mut n) = (0.0, 0.0, 0.0);
            for r in i.saturating_sub(1)..(i + 2).min(h) {
                for c in j.saturating_sub(1)..(j + 2).min(w) {
                    let v = cover.get(r, c);
                    s += v;
                    s2 += v * v;
                    n += 1.0;
                }
            }
            let mean = s / n;
            let var = (s2 / n - mean * mean).max(0.0);
            costs.push(1.0 / (var + COST_EPSILON));
        }
    }
    costs
}

pub fn embed_adaptive(cover: &ImageGrid, cfg: &StegoConfig) -> Result<EmbedResult> {
    cfg.validate()?;
    check_cover(cover)?;
    let costs = adaptive_costs(cover);
    let n = cover.len();
    let mut order = cfg.key_permutation(n);
    // Stable sort: equal costs keep key order.
    order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]));
    order.truncate(cfg.visit_count(n));
    Ok(lsb_match(cover, order, cfg))
}

/// Read back the LSBs at the given pixel positions.
pub fn extract_lsb(stego: &ImageGrid, visited: &[usize]) -> Vec<u8> {
    visited.iter().map(|&p| stego.values()[p] as u8 & 1).collect()
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;
    use crate::rng::SplitMix64;
    use crate::stego::{count_modified, Algorithm, KeyMode};
    use proptest::prelude::*;

    fn noise_cover(seed: u64, n: usize) -> ImageGrid {
        let mut rng = SplitMix64::new(seed);
        ImageGrid::from_fn(n, n, |_, _| rng.below(256) as f64)
    }

    fn cfg(alg: Algorithm, alpha: f64, key: KeyMode) -> StegoConfig {
        StegoConfig::new(alg, alpha, key, 99).unwrap()
    }

    #[test]
    fn zero_payload_is_identity() {
        let cover = noise_cover(1, 16);
        for alg in [Algorithm::LsbMatching, Algorithm::AdaptiveCost] {
            let r = super::super::embed(&cover, &cfg(alg, 0.0, KeyMode::Fixed { seed: 3 })).unwrap();
            assert_eq!(r.stego, cover);
            assert_eq!(r.modified_count, 0);
            assert_eq!(r.positions_used(), 0);
        }
    }

    #[test]
    fn fixed_key_reuses_positions_across_images() {
        let c = cfg(Algorithm::LsbMatching, 0.3, KeyMode::Fixed { seed: 5 });
        let a = embed_lsb_matching(&noise_cover(1, 16), &c.for_image(0)).unwrap();
        let b = embed_lsb_matching(&noise_cover(2, 16), &c.for_image(1)).unwrap();
        assert_eq!(a.visited, b.visited);
        assert_ne!(a.message, b.message);
    }

    #[test]
    fn per_image_key_changes_positions() {
        let c = cfg(Algorithm::LsbMatching, 0.3, KeyMode::PerImage { master_seed: 5 });
        let a = embed_lsb_matching(&noise_cover(1, 16), &c.for_image(0)).unwrap();
        let b = embed_lsb_matching(&noise_cover(1, 16), &c.for_image(1)).unwrap();
        assert_ne!(a.visited, b.visited);
    }

    #[test]
    fn clamping_at_range_ends() {
        let c = cfg(Algorithm::LsbMatching, 1.0, KeyMode::Fixed { seed: 1 });
        for v in [0.0, 255.0] {
            let cover = ImageGrid::filled(8, 8, v);
            let r = embed_lsb_matching(&cover, &c).unwrap();
            assert!(r.stego.values().iter().all(|&x| (0.0..=255.0).contains(&x)));
            assert_eq!(extract_lsb(&r.stego, &r.visited), r.message);
        }
    }

    #[test]
    fn constant_cover_adaptive_equals_lsb_matching() {
        let cover = ImageGrid::filled(16, 16, 100.0);
        let key = KeyMode::Fixed { seed: 17 };
        let a = embed_adaptive(&cover, &cfg(Algorithm::AdaptiveCost, 0.25, key)).unwrap();
        let l = embed_lsb_matching(&cover, &cfg(Algorithm::LsbMatching, 0.25, key)).unwrap();
        assert_eq!(a.visited, l.visited);
        assert_eq!(a.stego, l.stego);
    }

    #[test]
    fn adaptive_prefers_texture() {
        let n = 32;
        let mut rng = SplitMix64::new(4);
        let cover = ImageGrid::from_fn(n, n, |_, j| if j < n / 2 { 128.0 } else { rng.below(256) as f64 });
        let r = embed_adaptive(&cover, &cfg(Algorithm::AdaptiveCost, 0.1, KeyMode::Fixed { seed: 2 })).unwrap();
        assert_eq!(r.positions_used(), 103);
        assert!(r.visited.iter().all(|&p| p % n >= n / 2));
    }

    #[test]
    fn modified_count_consistent() {
        let cover = noise_cover(8, 32);
        let r = embed_lsb_matching(&cover, &cfg(Algorithm::LsbMatching, 0.4, KeyMode::Fixed { seed: 1 })).unwrap();
        assert_eq!(count_modified(&cover, &r.stego).unwrap(), r.modified_count);
        assert!(r.modified_count <= r.positions_used());
    }

    #[test]
    fn per_image_overlap_is_chance() {
        // Mean pairwise overlap |A ∩ B| / |A| of independent random subsets is
        // |A| / N, i.e. alpha up to the ceiling.
        let alpha = 0.3;
        let n = 16;
        let c = cfg(Algorithm::LsbMatching, alpha, KeyMode::PerImage { master_seed: 21 });
        let cover = ImageGrid::filled(n, n, 50.0);
        let sets: Vec<HashSet<usize>> = (0..100)
            .map(|i| {
                embed_lsb_matching(&cover, &c.for_image(i))
                    .unwrap()
                    .visited
                    .into_iter()
                    .collect()
            })
            .collect();
        let m = sets[0].len() as f64;
        let mut overlaps = Vec::new();
        for i in 0..sets.len() {
            for j in i + 1..sets.len() {
                overlaps.push(sets[i].intersection(&sets[j]).count() as f64 / m);
            }
        }
        let mean = overlaps.iter().sum::<f64>() / overlaps.len() as f64;
        // Hypergeometric variance of one overlap, shrunk by the number of
        // independent images (pairs are correlated, so use images, not pairs).
        let big_n = (n * n) as f64;
        let var = m * (m / big_n) * (1.0 - m / big_n) * (big_n - m) / (big_n - 1.0) / (m * m);
        let se = (var / sets.len() as f64).sqrt();
        assert!((mean - m / big_n).abs() < 3.0 * se, "mean overlap {mean}");
        assert!((m / big_n - alpha).abs() < 1.0 / big_n);
    }

    proptest! {
        #[test]
        fn spatial_invariants(seed in any::<u64>(), alpha in 0.0f64..=1.0, key in any::<u64>(), adaptive in any::<bool>()) {
            let cover = noise_cover(seed, 12);
            let alg = if adaptive { Algorithm::AdaptiveCost } else { Algorithm::LsbMatching };
            let r = super::super::embed(&cover, &cfg(alg, alpha, KeyMode::Fixed { seed: key })).unwrap();
            prop_assert_eq!(r.stego.dims(), cover.dims());
            prop_assert!(cover.values().iter().zip(r.stego.values()).all(|(a, b)| (a - b).abs() <= 1.0));
            prop_assert_eq!(extract_lsb(&r.stego, &r.visited), r.message.clone());
            prop_assert!(r.modified_count <= r.positions_used());
            prop_assert_eq!(r.positions_used(), (alpha * 144.0 - 1e-9).ceil().max(0.0) as usize);
        }
    }
}
