use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context};
use stegcnn::dataset::split_order;
use stegcnn::network::{COVER, STEGO};
use stegcnn::{embed, evaluate, Checkpoint, Corpus, CorpusItem, DetectionReport, ImageGrid, StegoConfig};

use crate::corpus::load_pairs;
use crate::{Classify, CliResult};

/// Which pairs of the corpus to evaluate on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    /// The training half, as split when the checkpoint was trained.
    Train,
    /// The held-out half.
    Test,
    /// Every pair; the usual choice for a foreign corpus.
    All,
}

impl FromStr for Split {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            "all" => Ok(Split::All),
            _ => bail!("unknown split {s:?} (expected train, test or all)"),
        }
    }
}

impl Split {
    fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::All => "all",
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalArgs {
    pub checkpoint: PathBuf,
    pub corpus: PathBuf,
    pub split: Split,
    /// Re-embed every stego twin at this payload (same algorithm, key and
    /// message seed as recorded in the corpus) before evaluating.
    pub payload: Option<f64>,
    /// Report destination; nothing is written when `None`.
    pub out: Option<PathBuf>,
    /// Write the CSV form (header plus one row) instead of the table.
    pub csv: bool,
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub report: DetectionReport,
    /// The report text, provenance header included.
    pub text: String,
}

/// Classify a corpus with a trained checkpoint.
///
/// Images must match the checkpoint's input size; a mismatch is rejected
/// before any inference. Inputs are normalized with the checkpoint's
/// training statistics.
pub fn eval(args: &EvalArgs) -> CliResult<EvalOutcome> {
    let ck = Checkpoint::load(&args.checkpoint).usage()?;
    let norm = ck
        .normalization
        .ok_or_else(|| anyhow!("checkpoint carries no input normalization"))
        .usage()?;
    let pairs = load_pairs(&args.corpus)?;
    let n = ck.spec.input_size;
    if let Some(bad) = pairs.covers.iter().chain(&pairs.stegos).find(|g| g.dims() != (n, n)) {
        let (h, w) = bad.dims();
        return Err(anyhow!("corpus images are {h}x{w} but the checkpoint expects {n}x{n}")).usage();
    }

    let indices: Vec<usize> = match args.split {
        Split::All => (0..pairs.ids.len()).collect(),
        split => {
            let ratio: f64 = ck_meta(&ck, "split_ratio")?;
            let seed: u64 = ck_meta(&ck, "split_seed")?;
            let (train, test) = split_order(pairs.ids.len(), ratio, seed);
            if split == Split::Train {
                train
            } else {
                test
            }
        }
    };

    let stegos: Vec<ImageGrid> = match args.payload {
        None => indices.iter().map(|&i| pairs.stegos[i].clone()).collect(),
        Some(alpha) => {
            let cfg = StegoConfig::new(
                pairs.meta("algorithm")?,
                alpha,
                pairs.meta("key_mode")?,
                pairs.meta("message_seed")?,
            )
            .usage()?;
            indices
                .iter()
                .map(|&i| embed(&pairs.covers[i], &cfg.for_image(pairs.ids[i])).map(|r| r.stego))
                .collect::<stegcnn::Result<_>>()
                .usage()?
        }
    };
    let items = indices
        .iter()
        .zip(stegos)
        .flat_map(|(&i, stego)| {
            let id = pairs.ids[i];
            [
                CorpusItem {
                    image: pairs.covers[i].clone(),
                    label: COVER,
                    source_id: id,
                },
                CorpusItem {
                    image: stego,
                    label: STEGO,
                    source_id: id,
                },
            ]
        })
        .collect();
    let corpus = Corpus::new(items).normalize_with(norm).usage()?;
    let report = evaluate(&ck.params, &ck.spec, &corpus).failed()?;

    let mut text = String::new();
    for (k, v) in &ck.meta {
        let _ = writeln!(text, "# {k}={v}");
    }
    for (k, v) in &ck.seeds {
        let _ = writeln!(text, "# seed.{k}={v}");
    }
    let _ = writeln!(text, "# checkpoint_epoch={}", ck.epoch);
    let _ = writeln!(text, "# eval.split={}", args.split.name());
    if let Some(alpha) = args.payload {
        let _ = writeln!(text, "# eval.payload={alpha}");
    }
    let _ = writeln!(text, "# eval.pairs={}", indices.len());
    if args.csv {
        let _ = writeln!(text, "{}", DetectionReport::csv_header());
        let _ = writeln!(text, "{}", report.csv_row());
    } else {
        text.push_str(&report.render());
    }
    if let Some(out) = &args.out {
        if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)
                .with_context(|| format!("creating {}", dir.display()))
                .failed()?;
        }
        fs::write(out, &text)
            .with_context(|| format!("writing {}", out.display()))
            .failed()?;
    }
    Ok(EvalOutcome { report, text })
}

fn ck_meta<T: FromStr>(ck: &Checkpoint, key: &str) -> CliResult<T> {
    ck.meta
        .get(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| anyhow!("checkpoint lacks a valid `{key}` entry; use --split all"))
        .usage()
}
