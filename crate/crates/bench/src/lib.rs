//! Fixtures shared by the benchmarks.

use stegcnn::dataset::synth_cover;
use stegcnn::{ImageGrid, Normalization};

/// A normalized procedural cover of side `size`.
pub fn normalized_cover(seed: u64, size: usize) -> ImageGrid {
    Normalization { mean: 0.5, std: 0.25 }.apply_grid(&synth_cover(seed, 0, size))
}
