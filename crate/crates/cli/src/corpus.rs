use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, Context};
use stegcnn::dataset::{load_pgm, CorpusManifest};
use stegcnn::network::{COVER, STEGO};
use stegcnn::ImageGrid;

use crate::{Classify, CliResult};

/// A corpus manifest resolved into cover/stego twins, ordered by source id.
pub(crate) struct Pairs {
    pub ids: Vec<u64>,
    pub covers: Vec<ImageGrid>,
    pub stegos: Vec<ImageGrid>,
    pub meta: BTreeMap<String, String>,
}

impl Pairs {
    /// Metadata value parsed as `T`; missing or malformed values are usage errors.
    pub fn meta<T: std::str::FromStr>(&self, key: &str) -> CliResult<T> {
        let v = self
            .meta
            .get(key)
            .ok_or_else(|| anyhow!("corpus manifest has no `{key}` entry"))
            .usage()?;
        v.parse()
            .map_err(|_| anyhow!("corpus manifest entry `{key}={v}` is malformed"))
            .usage()
    }
}

pub(crate) fn load_pairs(path: &Path) -> CliResult<Pairs> {
    if !path.exists() {
        return Err(anyhow!(
            "corpus manifest {} does not exist (run `stegcnn generate` first)",
            path.display()
        ))
        .usage();
    }
    let manifest = CorpusManifest::load(path).usage()?;
    let mut twins: BTreeMap<u64, [Option<ImageGrid>; 2]> = BTreeMap::new();
    for e in &manifest.entries {
        let img = load_pgm(&e.path)
            .with_context(|| format!("corpus {}", path.display()))
            .usage()?;
        let slot = &mut twins.entry(e.source_id).or_default()[e.label];
        if slot.is_some() {
            return Err(anyhow!("source {} has two images with label {}", e.source_id, e.label)).usage();
        }
        *slot = Some(img);
    }
    let mut pairs = Pairs {
        ids: Vec::with_capacity(twins.len()),
        covers: Vec::with_capacity(twins.len()),
        stegos: Vec::with_capacity(twins.len()),
        meta: manifest.meta,
    };
    for (id, [cover, stego]) in twins {
        match (cover, stego) {
            (Some(c), Some(s)) => {
                pairs.ids.push(id);
                pairs.covers.push(c);
                pairs.stegos.push(s);
            }
            (c, _) => {
                let missing = if c.is_none() { COVER } else { STEGO };
                return Err(anyhow!("source {id} lacks its {} image", ["cover", "stego"][missing])).usage();
            }
        }
    }
    if pairs.ids.is_empty() {
        return Err(anyhow!("corpus manifest {} lists no images", path.display())).usage();
    }
    Ok(pairs)
}
