//! Line-oriented manifests.
//!
//! Corpus manifest, one image per line: `<path> <label> <source_id>`, with
//! `label` 0 (cover) or 1 (stego). Lines starting with `#` are comments; the
//! writer uses `# key=value` comment lines for provenance.
//!
//! Batch embedding manifest, one job per line:
//! `<cover_path> <algorithm> <alpha> <key_mode> <output_path>`, where
//! `key_mode` is `fixed:<seed>` or `per_image:<seed>`. The record ordinal
//! (counting from 0, comments excluded) is the image index.
//!
//! Relative paths are resolved against the manifest's directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::stego::{Algorithm, KeyMode};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    pub path: PathBuf,
    pub label: usize,
    pub source_id: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorpusManifest {
    pub meta: BTreeMap<String, String>,
    pub entries: Vec<CorpusEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchRecord {
    pub cover: PathBuf,
    pub algorithm: Algorithm,
    pub payload: f64,
    pub key_mode: KeyMode,
    pub output: PathBuf,
}

fn records(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = PathBuf::from(p);
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

impl CorpusManifest {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut meta = BTreeMap::new();
        for line in text.lines() {
            if let Some((k, v)) = line.strip_prefix('#').and_then(|c| c.trim().split_once('=')) {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        let mut entries = Vec::new();
        for (no, line) in records(text) {
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = |what: &str| Error::Corpus(format!("manifest line {no}: {what}: {line:?}"));
            if fields.len() != 3 {
                return Err(bad("expected <path> <label> <source_id>"));
            }
            let label: usize = fields[1].parse().map_err(|_| bad("bad label"))?;
            if label > 1 {
                return Err(bad("label must be 0 or 1"));
            }
            entries.push(CorpusEntry {
                path: resolve(base, fields[0]),
                label,
                source_id: fields[2].parse().map_err(|_| bad("bad source_id"))?,
            });
        }
        Ok(CorpusManifest { meta, entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &base_dir(path))
    }

    /// Render with paths made relative to `base` where possible.
    pub fn render(&self, base: &Path) -> String {
        let mut s = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(s, "# {k}={v}");
        }
        for e in &self.entries {
            let p = e.path.strip_prefix(base).unwrap_or(&e.path);
            let _ = writeln!(s, "{} {} {}", p.display(), e.label, e.source_id);
        }
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.render(&base_dir(path))).map_err(|e| Error::io(path, e))
    }
}

pub fn parse_batch(text: &str, base: &Path) -> Result<Vec<BatchRecord>> {
    records(text)
        .map(|(no, line)| {
            let f: Vec<&str> = line.split_whitespace().collect();
            let bad = |what: String| Error::Corpus(format!("batch line {no}: {what}"));
            if f.len() != 5 {
                return Err(bad(format!(
                    "expected <cover> <algorithm> <alpha> <key_mode> <output>, got {line:?}"
                )));
            }
            let payload: f64 = f[2].parse().map_err(|_| bad(format!("bad alpha {:?}", f[2])))?;
            if !(0.0..=1.0).contains(&payload) {
                return Err(bad(format!("alpha {payload} outside [0, 1]")));
            }
            Ok(BatchRecord {
                cover: resolve(base, f[0]),
                algorithm: f[1].parse().map_err(|e: Error| bad(e.to_string()))?,
                payload,
                key_mode: f[3].parse().map_err(|e: Error| bad(e.to_string()))?,
                output: resolve(base, f[4]),
            })
        })
        .collect()
}

pub fn load_batch(path: impl AsRef<Path>) -> Result<Vec<BatchRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_batch(&text, &base_dir(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_manifest_round_trip() {
        let base = Path::new("/data/run");
        let m = CorpusManifest {
            meta: [("seed".to_string(), "7".to_string())].into(),
            entries: vec![
                CorpusEntry {
                    path: base.join("cover/0.pgm"),
                    label: 0,
                    source_id: 0,
                },
                CorpusEntry {
                    path: base.join("stego/0.pgm"),
                    label: 1,
                    source_id: 0,
                },
            ],
        };
        let text = m.render(base);
        assert!(text.starts_with("# seed=7\ncover/0.pgm 0 0\n"));
        assert_eq!(CorpusManifest::parse(&text, base).unwrap(), m);
    }

    #[test]
    fn corpus_manifest_errors() {
        let base = Path::new(".");
        assert!(CorpusManifest::parse("a.pgm 2 0\n", base).is_err());
        assert!(CorpusManifest::parse("a.pgm 0\n", base).is_err());
        assert!(CorpusManifest::parse("a.pgm x 0\n", base).is_err());
    }

    #[test]
    fn batch_parsing() {
        let text =
            "# jobs\ncovers/a.pgm lsb_matching 0.4 fixed:12 out/a.pgm\n/abs/b.pgm dct_lsb 0.1 per_image:3 out/b.pgm\n";
        let recs = parse_batch(text, Path::new("/w")).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].cover, PathBuf::from("/w/covers/a.pgm"));
        assert_eq!(recs[0].key_mode, KeyMode::Fixed { seed: 12 });
        assert_eq!(recs[1].cover, PathBuf::from("/abs/b.pgm"));
        assert_eq!(recs[1].algorithm, Algorithm::DctLsb);
        assert!(parse_batch("a lsb_matching 1.5 fixed:1 b\n", Path::new(".")).is_err());
        assert!(parse_batch("a wow 0.1 fixed:1 b\n", Path::new(".")).is_err());
    }
}
