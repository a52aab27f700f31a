use std::fmt::Write as _;
use std::fs;
use std::path::{Component, Path, PathBuf};

use anyhow::{anyhow, Context};
use stegcnn::dataset::{load_pgm, parse_batch, save_pgm, synth_covers, CorpusEntry, CorpusManifest};
use stegcnn::network::{COVER, STEGO};
use stegcnn::{embed, StegoConfig};

use crate::config::ExperimentConfig;
use crate::{layout, Classify, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateSummary {
    pub count: usize,
    pub mean_modified: f64,
    pub manifest: PathBuf,
}

fn create_dir(p: &Path) -> CliResult<()> {
    fs::create_dir_all(p)
        .with_context(|| format!("creating {}", p.display()))
        .failed()
}

fn write(p: &Path, contents: &str) -> CliResult<()> {
    fs::write(p, contents)
        .with_context(|| format!("writing {}", p.display()))
        .failed()
}

/// Synthesize covers, embed one stego twin per cover, and write the PGMs, the
/// corpus manifest and the per-image modification counts.
pub fn generate(cfg: &ExperimentConfig) -> CliResult<GenerateSummary> {
    cfg.validate().usage()?;
    let out = &cfg.output_dir;
    create_dir(&out.join(layout::COVER_DIR))?;
    create_dir(&out.join(layout::STEGO_DIR))?;
    let stego_cfg = cfg.stego().usage()?;

    let mut manifest = CorpusManifest::default();
    manifest.meta.insert("config_digest".into(), cfg.digest());
    for (k, v) in cfg.seeds() {
        manifest.meta.insert(format!("seed.{k}"), v.to_string());
    }
    for (k, v) in [
        ("algorithm", cfg.algorithm.to_string()),
        ("payload", cfg.payload.to_string()),
        ("key_mode", cfg.key_mode.to_string()),
        ("message_seed", cfg.message_seed.to_string()),
        ("image_size", cfg.image_size.to_string()),
    ] {
        manifest.meta.insert(k.into(), v);
    }

    let mut csv = cfg.provenance();
    csv.push_str("index,positions_used,modified\n");
    let mut total = 0usize;
    let covers = synth_covers(cfg.cover_seed, cfg.cover_count, cfg.image_size);
    for (i, cover) in covers.iter().enumerate() {
        let res = embed(cover, &stego_cfg.for_image(i as u64)).failed()?;
        let cover_path = out.join(layout::COVER_DIR).join(format!("cover_{i:05}.pgm"));
        let stego_path = out.join(layout::STEGO_DIR).join(format!("stego_{i:05}.pgm"));
        save_pgm(cover, &cover_path).failed()?;
        save_pgm(&res.stego, &stego_path).failed()?;
        for (path, label) in [(cover_path, COVER), (stego_path, STEGO)] {
            manifest.entries.push(CorpusEntry {
                path,
                label,
                source_id: i as u64,
            });
        }
        let _ = writeln!(csv, "{i},{},{}", res.positions_used(), res.modified_count);
        total += res.modified_count;
    }
    let manifest_path = out.join(layout::CORPUS);
    manifest.save(&manifest_path).failed()?;
    write(&out.join(layout::MODIFICATIONS), &csv)?;
    Ok(GenerateSummary {
        count: covers.len(),
        mean_modified: total as f64 / covers.len() as f64,
        manifest: manifest_path,
    })
}

/// Where a batch output lands: relative paths go under `out`; absolute paths
/// must already point inside it.
fn confine(out: &Path, p: &Path) -> CliResult<PathBuf> {
    if p.components().any(|c| matches!(c, Component::ParentDir)) {
        return Err(anyhow!("batch output {} must not contain `..`", p.display())).usage();
    }
    if p.is_absolute() {
        if p.starts_with(out) {
            return Ok(p.to_path_buf());
        }
        return Err(anyhow!(
            "batch output {} lies outside the output directory {}",
            p.display(),
            out.display()
        ))
        .usage();
    }
    Ok(out.join(p))
}

/// Run a batch embedding manifest. Covers are resolved against the manifest's
/// directory, outputs against the output directory; the message seed comes
/// from the configuration and the record ordinal is the image index.
/// Returns the number of images written.
pub fn generate_batch(cfg: &ExperimentConfig, batch: &Path) -> CliResult<usize> {
    let text = fs::read_to_string(batch)
        .with_context(|| format!("reading batch manifest {}", batch.display()))
        .usage()?;
    let records = parse_batch(&text, Path::new("")).usage()?;
    let base = batch.parent().unwrap_or(Path::new(""));
    let out = &cfg.output_dir;
    create_dir(out)?;

    let mut csv = cfg.provenance();
    csv.push_str("index,cover,output,algorithm,alpha,key_mode,positions_used,modified\n");
    for (i, rec) in records.iter().enumerate() {
        let cover_path = if rec.cover.is_absolute() {
            rec.cover.clone()
        } else {
            base.join(&rec.cover)
        };
        let cover = load_pgm(&cover_path).usage()?;
        let scfg = StegoConfig::new(rec.algorithm, rec.payload, rec.key_mode, cfg.message_seed)
            .usage()?
            .for_image(i as u64);
        let res = embed(&cover, &scfg)
            .with_context(|| format!("embedding {}", cover_path.display()))
            .usage()?;
        let target = confine(out, &rec.output)?;
        if let Some(dir) = target.parent() {
            create_dir(dir)?;
        }
        save_pgm(&res.stego, &target).failed()?;
        let _ = writeln!(
            csv,
            "{i},{},{},{},{},{},{},{}",
            rec.cover.display(),
            rec.output.display(),
            rec.algorithm,
            rec.payload,
            rec.key_mode,
            res.positions_used(),
            res.modified_count
        );
    }
    write(&out.join(layout::BATCH_MODIFICATIONS), &csv)?;
    Ok(records.len())
}
