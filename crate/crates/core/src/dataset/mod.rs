//! Images, corpora and their normalization.

mod manifest;
mod pgm;
mod synth;

pub use manifest::{load_batch, parse_batch, BatchRecord, CorpusEntry, CorpusManifest};
pub use pgm::{decode_pgm, encode_pgm, load_pgm, save_pgm};
pub use synth::{synth_cover, synth_cover_with, synth_covers, synth_covers_with, CoverStyle, MIN_SIZE};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{COVER, STEGO};
use crate::rng::{SplitMix64, Stream};
use crate::tensor::ImageGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusItem {
    pub image: ImageGrid,
    pub label: usize,
    pub source_id: u64,
}

/// Affine map `x -> (x / 255 - mean) / std`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: f64,
    pub std: f64,
}

impl Normalization {
    /// Population statistics of `x / 255` over every pixel of every item.
    pub fn fit(items: &[CorpusItem]) -> Result<Self> {
        let n: usize = items.iter().map(|it| it.image.len()).sum();
        if n == 0 {
            return Err(Error::Corpus("cannot normalize an empty corpus".into()));
        }
        let first = items.iter().find_map(|it| it.image.values().first().copied());
        if items
            .iter()
            .all(|it| it.image.values().iter().all(|&v| Some(v) == first))
        {
            return Err(Error::Corpus(
                "corpus has zero intensity variance; cannot normalize".into(),
            ));
        }
        let pixels = || items.iter().flat_map(|it| it.image.values().iter().map(|v| v / 255.0));
        let mean = pixels().sum::<f64>() / n as f64;
        let var = pixels().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        Ok(Normalization { mean, std })
    }

    #[inline]
    pub fn apply(&self, raw: f64) -> f64 {
        (raw / 255.0 - self.mean) / self.std
    }

    pub fn apply_grid(&self, raw: &ImageGrid) -> ImageGrid {
        raw.map(|v| self.apply(v))
    }
}

/// Labelled images plus the normalization they were (or will be) put through.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub items: Vec<CorpusItem>,
    normalization: Option<Normalization>,
}

impl Corpus {
    /// A raw (unnormalized) corpus.
    pub fn new(items: Vec<CorpusItem>) -> Self {
        Corpus {
            items,
            normalization: None,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalization.is_some()
    }

    pub fn normalization(&self) -> Option<Normalization> {
        self.normalization
    }

    pub fn label_counts(&self) -> [usize; 2] {
        let mut c = [0; 2];
        for it in &self.items {
            c[it.label] += 1;
        }
        c
    }

    /// Normalize with statistics computed elsewhere (e.g. on training data).
    pub fn normalize_with(mut self, stats: Normalization) -> Result<Self> {
        if self.is_normalized() {
            return Err(Error::Corpus("corpus is already normalized".into()));
        }
        for it in &mut self.items {
            it.image = stats.apply_grid(&it.image);
        }
        self.normalization = Some(stats);
        Ok(self)
    }
}

/// Normalize a raw corpus with its own global population statistics.
pub fn normalize(corpus: Corpus) -> Result<Corpus> {
    if corpus.is_normalized() {
        return Err(Error::Corpus("corpus is already normalized".into()));
    }
    let stats = Normalization::fit(&corpus.items)?;
    corpus.normalize_with(stats)
}

/// Split cover/stego twins into training and test corpora.
///
/// Pair `i` (source id `i`) goes wholly to one side; `round(ratio * pairs)`
/// pairs train. The training corpus is normalized with its own statistics
/// and the test corpus with the *training* statistics.
pub fn assemble(covers: &[ImageGrid], stegos: &[ImageGrid], split_ratio: f64, seed: u64) -> Result<(Corpus, Corpus)> {
    let (train, test) = split_pairs(covers, stegos, split_ratio, seed)?;
    let train = normalize(train)?;
    let stats = train.normalization().expect("just normalized");
    let test = test.normalize_with(stats)?;
    Ok((train, test))
}

/// The raw (unnormalized) halves of [`assemble`].
pub fn split_pairs(
    covers: &[ImageGrid],
    stegos: &[ImageGrid],
    split_ratio: f64,
    seed: u64,
) -> Result<(Corpus, Corpus)> {
    if covers.len() != stegos.len() {
        return Err(Error::Corpus(format!(
            "{} covers but {} stego images; every cover needs exactly one stego twin",
            covers.len(),
            stegos.len()
        )));
    }
    if let Some(i) = covers.iter().zip(stegos).position(|(c, s)| c.dims() != s.dims()) {
        return Err(Error::Corpus(format!("pair {i}: cover and stego dimensions differ")));
    }
    if !(0.0..=1.0).contains(&split_ratio) {
        return Err(Error::InvalidValue(format!(
            "split ratio must lie in [0, 1], got {split_ratio}"
        )));
    }
    let pairs = split_order(covers.len(), split_ratio, seed);
    let build = |ids: &[usize]| {
        Corpus::new(
            ids.iter()
                .flat_map(|&i| {
                    [
                        CorpusItem {
                            image: covers[i].clone(),
                            label: COVER,
                            source_id: i as u64,
                        },
                        CorpusItem {
                            image: stegos[i].clone(),
                            label: STEGO,
                            source_id: i as u64,
                        },
                    ]
                })
                .collect(),
        )
    };
    Ok((build(&pairs.0), build(&pairs.1)))
}

/// Shuffled pair indices: (train, test).
pub fn split_order(pairs: usize, split_ratio: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order = SplitMix64::derive(seed, Stream::Split, 0).permutation(pairs);
    let n_train = ((split_ratio * pairs as f64).round() as usize).min(pairs);
    let test = order.split_off(n_train);
    (order, test)
}
