//! Experiment configuration: a line-oriented `key = value` file.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are an
//! error, so typos cannot silently fall back to defaults. Every key has a
//! default (see [`ExperimentConfig::default`]); `--set key=value` flags are
//! applied after the file, in order.
//!
//! The digest is the SHA-256 of the canonical rendering (sorted keys,
//! re-formatted values) without `output_dir`, so where a run writes does not
//! change what it writes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use sha2::{Digest, Sha256};
use stegcnn::{Algorithm, KeyMode, NetworkSpec, StegoConfig, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub image_size: usize,
    pub cover_count: usize,
    pub cover_seed: u64,
    pub algorithm: Algorithm,
    pub payload: f64,
    pub key_mode: KeyMode,
    pub message_seed: u64,
    pub split_ratio: f64,
    pub split_seed: u64,
    pub init_seed: u64,
    /// Kernels in the second convolutional layer.
    pub kernel_count: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub lr_decay: f64,
    pub momentum: f64,
    pub max_epochs: usize,
    pub patience: Option<usize>,
    pub shuffle_seed: u64,
    /// Fill the `seconds` column of the history. Off by default because
    /// timings differ between otherwise identical runs.
    pub record_wall_time: bool,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    /// The desk-scale fixed-key experiment.
    fn default() -> Self {
        ExperimentConfig {
            image_size: 32,
            cover_count: 1000,
            cover_seed: 1,
            algorithm: Algorithm::LsbMatching,
            payload: 0.4,
            key_mode: KeyMode::Fixed { seed: 11 },
            message_seed: 7,
            split_ratio: 0.8,
            split_seed: 3,
            init_seed: 1,
            kernel_count: 16,
            batch_size: 100,
            lr0: 0.5,
            lr_decay: 5e-7,
            momentum: 0.0,
            max_epochs: 200,
            patience: None,
            shuffle_seed: 5,
            record_wall_time: false,
            output_dir: PathBuf::from("out"),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| anyhow!("{key}: cannot parse {value:?}: {e}"))
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "image_size" => self.image_size = parse(key, v)?,
            "cover_count" => self.cover_count = parse(key, v)?,
            "cover_seed" => self.cover_seed = parse(key, v)?,
            "algorithm" => self.algorithm = parse(key, v)?,
            "payload" => self.payload = parse(key, v)?,
            "key_mode" => self.key_mode = parse(key, v)?,
            "message_seed" => self.message_seed = parse(key, v)?,
            "split_ratio" => self.split_ratio = parse(key, v)?,
            "split_seed" => self.split_seed = parse(key, v)?,
            "init_seed" => self.init_seed = parse(key, v)?,
            "kernel_count" => self.kernel_count = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "lr0" => self.lr0 = parse(key, v)?,
            "lr_decay" => self.lr_decay = parse(key, v)?,
            "momentum" => self.momentum = parse(key, v)?,
            "max_epochs" => self.max_epochs = parse(key, v)?,
            "patience" => {
                self.patience = match v {
                    "none" | "" => None,
                    _ => Some(parse(key, v)?),
                }
            }
            "shuffle_seed" => self.shuffle_seed = parse(key, v)?,
            "record_wall_time" => self.record_wall_time = parse(key, v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            other => bail!("unknown configuration key {other:?}"),
        }
        Ok(())
    }

    /// Apply `key=value` assignments (the `--set` syntax).
    pub fn apply_overrides<'a>(&mut self, sets: impl IntoIterator<Item = &'a str>) -> Result<()> {
        for s in sets {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| anyhow!("override {s:?} is not of the form key=value"))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value, got {line:?}", no + 1))?;
            cfg.set(k, v).with_context(|| format!("line {}", no + 1))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    /// Semantic checks shared by every command.
    pub fn validate(&self) -> Result<()> {
        if self.image_size < stegcnn::dataset::MIN_SIZE {
            bail!("image_size must be at least {}", stegcnn::dataset::MIN_SIZE);
        }
        if self.cover_count == 0 {
            bail!("cover_count must be positive");
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            bail!(
                "split_ratio must lie strictly between 0 and 1, got {}",
                self.split_ratio
            );
        }
        if self.kernel_count == 0 {
            bail!("kernel_count must be positive");
        }
        self.stego()?;
        self.network().layer_shapes()?;
        self.train().validate()?;
        Ok(())
    }

    pub fn stego(&self) -> Result<StegoConfig> {
        Ok(StegoConfig::new(
            self.algorithm,
            self.payload,
            self.key_mode,
            self.message_seed,
        )?)
    }

    pub fn network(&self) -> NetworkSpec {
        NetworkSpec::two_layer(self.image_size, self.kernel_count)
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            lr0: self.lr0,
            lr_decay: self.lr_decay,
            momentum: self.momentum,
            max_epochs: self.max_epochs,
            early_stop: self.patience,
            shuffle_seed: self.shuffle_seed,
        }
    }

    fn entries(&self) -> BTreeMap<&'static str, String> {
        BTreeMap::from([
            ("image_size", self.image_size.to_string()),
            ("cover_count", self.cover_count.to_string()),
            ("cover_seed", self.cover_seed.to_string()),
            ("algorithm", self.algorithm.to_string()),
            ("payload", self.payload.to_string()),
            ("key_mode", self.key_mode.to_string()),
            ("message_seed", self.message_seed.to_string()),
            ("split_ratio", self.split_ratio.to_string()),
            ("split_seed", self.split_seed.to_string()),
            ("init_seed", self.init_seed.to_string()),
            ("kernel_count", self.kernel_count.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("lr0", self.lr0.to_string()),
            ("lr_decay", self.lr_decay.to_string()),
            ("momentum", self.momentum.to_string()),
            ("max_epochs", self.max_epochs.to_string()),
            ("patience", self.patience.map_or("none".into(), |p| p.to_string())),
            ("shuffle_seed", self.shuffle_seed.to_string()),
            ("record_wall_time", self.record_wall_time.to_string()),
        ])
    }

    /// Canonical text form; parsing it back yields an equal config.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        let _ = writeln!(s, "output_dir = {}", self.output_dir.display());
        s
    }

    /// Hex SHA-256 of the canonical rendering, `output_dir` excluded.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.entries() {
            h.update(format!("{k}={v}\n").as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Every seed that feeds a random stream, by name.
    pub fn seeds(&self) -> BTreeMap<String, u64> {
        let key = match self.key_mode {
            KeyMode::Fixed { seed } => seed,
            KeyMode::PerImage { master_seed } => master_seed,
        };
        BTreeMap::from([
            ("cover".to_string(), self.cover_seed),
            ("key".to_string(), key),
            ("message".to_string(), self.message_seed),
            ("split".to_string(), self.split_seed),
            ("init".to_string(), self.init_seed),
            ("shuffle".to_string(), self.shuffle_seed),
        ])
    }

    /// `# key=value` provenance lines: digest, seeds and the full config.
    pub fn provenance(&self) -> String {
        let mut s = format!("# config_digest={}\n", self.digest());
        for (k, v) in self.seeds() {
            let _ = writeln!(s, "# seed.{k}={v}");
        }
        for (k, v) in self.entries() {
            let _ = writeln!(s, "# config.{k}={v}");
        }
        s
    }
}
