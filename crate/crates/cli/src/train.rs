use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use stegcnn::trainer::EpochRecord;
use stegcnn::{assemble, build_network, Checkpoint, ParameterStore};

use crate::config::ExperimentConfig;
use crate::corpus::load_pairs;
use crate::{layout, Classify, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_test_accuracy: f64,
    pub final_train_accuracy: f64,
    pub final_test_accuracy: f64,
}

/// Train on a generated corpus (default: `<output_dir>/corpus.txt`) and write
/// the final and best checkpoints, the per-epoch history and a short report.
/// `on_epoch` sees every epoch as it finishes.
pub fn train(
    cfg: &ExperimentConfig,
    corpus: Option<&Path>,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> CliResult<TrainSummary> {
    cfg.validate().usage()?;
    let out = &cfg.output_dir;
    let manifest = corpus.map_or_else(|| out.join(layout::CORPUS), PathBuf::from);
    let pairs = load_pairs(&manifest)?;
    let n = cfg.image_size;
    if let Some(bad) = pairs.covers.iter().chain(&pairs.stegos).find(|g| g.dims() != (n, n)) {
        let (h, w) = bad.dims();
        return Err(anyhow!("corpus images are {h}x{w} but image_size is {n}")).usage();
    }
    let (train_set, test_set) = assemble(&pairs.covers, &pairs.stegos, cfg.split_ratio, cfg.split_seed).usage()?;
    let spec = cfg.network();
    let init = build_network(&spec, cfg.init_seed).failed()?;
    let outcome =
        stegcnn::trainer::train_with(&spec, init, &train_set, &test_set, &cfg.train(), &mut on_epoch).failed()?;
    let history = &outcome.history;
    let (best, last) = match (history.best(), history.last()) {
        (Some(b), Some(l)) => (*b, *l),
        _ => return Err(anyhow!("training ran no epochs")).failed(),
    };

    fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .failed()?;
    let norm = train_set.normalization();
    let checkpoint = |params: &ParameterStore, epoch: usize| {
        let mut ck = Checkpoint::new(spec.clone(), params.clone(), epoch);
        ck.normalization = norm;
        ck.seeds = cfg.seeds();
        ck.meta.insert("config_digest".into(), cfg.digest());
        ck.meta.insert("split_ratio".into(), cfg.split_ratio.to_string());
        ck.meta.insert("split_seed".into(), cfg.split_seed.to_string());
        for key in ["algorithm", "payload", "key_mode", "message_seed"] {
            if let Some(v) = pairs.meta.get(key) {
                ck.meta.insert(format!("corpus.{key}"), v.clone());
            }
        }
        ck
    };
    checkpoint(&outcome.final_params, last.epoch)
        .save(out.join(layout::FINAL_CHECKPOINT))
        .failed()?;
    checkpoint(&outcome.best_params, best.epoch)
        .save(out.join(layout::BEST_CHECKPOINT))
        .failed()?;

    let mut csv = cfg.provenance();
    csv.push_str(&history.to_csv(cfg.record_wall_time));
    fs::write(out.join(layout::HISTORY), csv).failed()?;

    let mut report = cfg.provenance();
    let _ = writeln!(
        report,
        "pairs: {} train, {} test",
        train_set.len() / 2,
        test_set.len() / 2
    );
    let _ = writeln!(report, "epochs run: {}", last.epoch);
    let _ = writeln!(
        report,
        "best epoch: {} (test accuracy {:.4})",
        best.epoch, best.test_acc
    );
    let _ = writeln!(
        report,
        "final epoch: train accuracy {:.4}, test accuracy {:.4}",
        last.train_acc, last.test_acc
    );
    fs::write(out.join(layout::TRAIN_REPORT), report).failed()?;

    Ok(TrainSummary {
        epochs: last.epoch,
        best_epoch: best.epoch,
        best_test_accuracy: best.test_acc,
        final_train_accuracy: last.train_acc,
        final_test_accuracy: last.test_acc,
    })
}
