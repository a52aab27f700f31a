//! Minibatch SGD, per-epoch accuracy tracking and detection reports.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Corpus, CorpusItem};
use crate::error::{Error, Result};
use crate::network::{forward, forward_backward, NetworkSpec, ParameterStore, COVER, STEGO};
use crate::rng::{SplitMix64, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr0: f64,
    pub lr_decay: f64,
    pub momentum: f64,
    pub max_epochs: usize,
    /// Stop after this many epochs without a new best test accuracy.
    pub early_stop: Option<usize>,
    pub shuffle_seed: u64,
}

impl TrainConfig {
    /// Batch 100, learning rate 0.5 with 5e-7 decay, no momentum.
    pub fn paper(max_epochs: usize) -> Self {
        TrainConfig {
            batch_size: 100,
            lr0: 0.5,
            lr_decay: 5e-7,
            momentum: 0.0,
            max_epochs,
            early_stop: None,
            shuffle_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidValue(m));
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return bad(format!("initial learning rate must be positive, got {}", self.lr0));
        }
        if self.lr_decay.is_nan() || self.lr_decay < 0.0 || self.momentum.is_nan() || self.momentum < 0.0 {
            return bad("learning-rate decay and momentum must be non-negative".into());
        }
        if self.early_stop == Some(0) {
            return bad("early-stopping patience must be positive".into());
        }
        Ok(())
    }

    /// `lr0 / (1 + decay * t)` for the `t`-th update (counting from 0).
    pub fn learning_rate(&self, t: u64) -> f64 {
        self.lr0 / (1.0 + self.lr_decay * t as f64)
    }
}

/// One SGD update. With momentum `m`: `v <- m v - lr_t g; w <- w + v`.
/// Without momentum the velocity buffer is left untouched and `w <- w - lr_t g`.
pub fn sgd_step(
    params: &mut ParameterStore,
    grads: &ParameterStore,
    velocity: &mut ParameterStore,
    step_index: u64,
    cfg: &TrainConfig,
) -> Result<()> {
    if !params.same_shape(grads) || !params.same_shape(velocity) {
        return Err(Error::Shape(
            "gradient or velocity does not match the parameter store".into(),
        ));
    }
    let lr = cfg.learning_rate(step_index);
    if cfg.momentum == 0.0 {
        params.axpy(-lr, grads);
    } else {
        velocity.scale(cfg.momentum);
        velocity.axpy(-lr, grads);
        params.axpy(1.0, velocity);
    }
    Ok(())
}

/// Samples per sequential accumulation chunk. Chunks run in parallel and are
/// combined in index order, so sums do not depend on the thread count.
const GRAD_CHUNK: usize = 8;

/// Mean gradient and mean loss over `indices` of `items`.
pub fn batch_gradient(
    params: &ParameterStore,
    spec: &NetworkSpec,
    items: &[CorpusItem],
    indices: &[usize],
) -> Result<(ParameterStore, f64)> {
    if indices.is_empty() {
        return Err(Error::Corpus("empty batch".into()));
    }
    let partials: Vec<(ParameterStore, f64)> = indices
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut acc = params.zeros_like();
            let mut loss = 0.0;
            for &i in chunk {
                let s = forward_backward(params, spec, &items[i].image, items[i].label)?;
                acc.axpy(1.0, &s.grads);
                loss += s.loss;
            }
            Ok((acc, loss))
        })
        .collect::<Result<_>>()?;
    let mut total = params.zeros_like();
    let mut loss = 0.0;
    for (g, l) in &partials {
        total.axpy(1.0, g);
        loss += l;
    }
    let n = indices.len() as f64;
    total.scale(1.0 / n);
    Ok((total, loss / n))
}

/// Confusion matrix plus per-class and total accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionReport {
    /// `confusion[actual][predicted]`, class 0 = cover, 1 = stego.
    pub confusion: [[usize; 2]; 2],
}

impl DetectionReport {
    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    fn class_acc(&self, c: usize) -> f64 {
        let n = self.confusion[c][0] + self.confusion[c][1];
        if n == 0 {
            f64::NAN
        } else {
            self.confusion[c][c] as f64 / n as f64
        }
    }

    pub fn cover_accuracy(&self) -> f64 {
        self.class_acc(COVER)
    }

    pub fn stego_accuracy(&self) -> f64 {
        self.class_acc(STEGO)
    }

    /// `(TP + TN) / all`.
    pub fn total_accuracy(&self) -> f64 {
        let n = self.total();
        if n == 0 {
            f64::NAN
        } else {
            (self.confusion[0][0] + self.confusion[1][1]) as f64 / n as f64
        }
    }

    /// Cover / Stego / Total percentage table followed by the confusion matrix.
    pub fn render(&self) -> String {
        let pct = |v: f64| {
            if v.is_nan() {
                "-".to_string()
            } else {
                format!("{:.2}%", 100.0 * v)
            }
        };
        let mut s = String::new();
        let _ = writeln!(s, "{:>10} {:>10} {:>10}", "Cover", "Stego", "Total");
        let _ = writeln!(
            s,
            "{:>10} {:>10} {:>10}",
            pct(self.cover_accuracy()),
            pct(self.stego_accuracy()),
            pct(self.total_accuracy())
        );
        let _ = writeln!(s);
        let _ = writeln!(s, "confusion matrix (rows: actual, columns: predicted)");
        let _ = writeln!(s, "{:>8} {:>8} {:>8}", "", "cover", "stego");
        for (name, row) in ["cover", "stego"].iter().zip(&self.confusion) {
            let _ = writeln!(s, "{:>8} {:>8} {:>8}", name, row[0], row[1]);
        }
        s
    }

    pub fn csv_header() -> &'static str {
        "cover_acc,stego_acc,total_acc,cover_as_cover,cover_as_stego,stego_as_cover,stego_as_stego"
    }

    pub fn csv_row(&self) -> String {
        let c = &self.confusion;
        format!(
            "{},{},{},{},{},{},{}",
            self.cover_accuracy(),
            self.stego_accuracy(),
            self.total_accuracy(),
            c[0][0],
            c[0][1],
            c[1][0],
            c[1][1]
        )
    }
}

/// Classify every item (argmax, ties to cover) and tabulate.
pub fn evaluate(params: &ParameterStore, spec: &NetworkSpec, corpus: &Corpus) -> Result<DetectionReport> {
    let predictions: Vec<usize> = corpus
        .items
        .par_iter()
        .map(|it| forward(params, spec, &it.image).map(|lp| lp.predict()))
        .collect::<Result<_>>()?;
    let mut confusion = [[0; 2]; 2];
    for (it, p) in corpus.items.iter().zip(predictions) {
        confusion[it.label][p] += 1;
    }
    Ok(DetectionReport { confusion })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_acc: f64,
    pub test_acc: f64,
    /// Mean per-sample loss over the epoch's minibatches, before each update.
    pub mean_loss: f64,
    /// Learning rate of the epoch's last update.
    pub lr: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch number (1-based) with the highest test accuracy; first one wins ties.
    pub best_epoch: Option<usize>,
}

impl TrainHistory {
    pub fn push(&mut self, rec: EpochRecord) -> bool {
        let improved = match self.best() {
            Some(b) => rec.test_acc > b.test_acc,
            None => true,
        };
        if improved {
            self.best_epoch = Some(rec.epoch);
        }
        self.epochs.push(rec);
        improved
    }

    pub fn best(&self) -> Option<&EpochRecord> {
        self.best_epoch.and_then(|e| self.epochs.iter().find(|r| r.epoch == e))
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    /// True once `patience` epochs have passed without a new best.
    pub fn should_stop(&self, patience: usize) -> bool {
        match (self.best_epoch, self.last()) {
            (Some(best), Some(last)) => last.epoch - best >= patience,
            _ => false,
        }
    }

    pub const CSV_HEADER: &'static str = "epoch,train_acc,test_acc,mean_loss,lr,seconds";

    /// CSV rows. Wall-clock seconds are non-reproducible, so they are left
    /// empty unless `with_time` is set.
    pub fn to_csv(&self, with_time: bool) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", Self::CSV_HEADER);
        for r in &self.epochs {
            let secs = if with_time {
                format!("{:.3}", r.seconds)
            } else {
                String::new()
            };
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.epoch, r.train_acc, r.test_acc, r.mean_loss, r.lr, secs
            );
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub final_params: ParameterStore,
    pub best_params: ParameterStore,
    pub history: TrainHistory,
}

/// Train `init` on `train`, tracking accuracy on `test` after every epoch.
///
/// Each epoch shuffles the training items with a generator derived from
/// `(shuffle_seed, epoch)`, walks them in minibatches (the last one may be
/// short) and applies one SGD step per batch using the mean gradient.
pub fn train(
    spec: &NetworkSpec,
    init: ParameterStore,
    train: &Corpus,
    test: &Corpus,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with(spec, init, train, test, cfg, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with(
    spec: &NetworkSpec,
    init: ParameterStore,
    train: &Corpus,
    test: &Corpus,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() || test.is_empty() {
        return Err(Error::Corpus("training and test corpora must be non-empty".into()));
    }
    if !train.is_normalized() || !test.is_normalized() {
        return Err(Error::Corpus("corpora must be normalized before training".into()));
    }
    if cfg.batch_size > train.len() {
        return Err(Error::InvalidValue(format!(
            "batch size {} exceeds training set size {}",
            cfg.batch_size,
            train.len()
        )));
    }
    let mut params = init;
    let mut best_params = params.clone();
    let mut velocity = params.zeros_like();
    let mut history = TrainHistory::default();
    let mut step: u64 = 0;

    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        let mut order: Vec<usize> = (0..train.len()).collect();
        SplitMix64::derive(cfg.shuffle_seed, Stream::Shuffle, epoch as u64).shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut lr = cfg.learning_rate(step);
        for batch in order.chunks(cfg.batch_size) {
            let (grads, loss) = batch_gradient(&params, spec, &train.items, batch)?;
            lr = cfg.learning_rate(step);
            sgd_step(&mut params, &grads, &mut velocity, step, cfg)?;
            step += 1;
            loss_sum += loss * batch.len() as f64;
        }
        if !params.all_finite() {
            return Err(Error::InvalidValue(format!("parameters diverged during epoch {epoch}")));
        }
        let rec = EpochRecord {
            epoch,
            train_acc: evaluate(&params, spec, train)?.total_accuracy(),
            test_acc: evaluate(&params, spec, test)?.total_accuracy(),
            mean_loss: loss_sum / train.len() as f64,
            lr,
            seconds: started.elapsed().as_secs_f64(),
        };
        on_epoch(&rec);
        if history.push(rec) {
            best_params = params.clone();
        }
        if cfg.early_stop.is_some_and(|p| history.should_stop(p)) {
            break;
        }
    }
    Ok(TrainOutcome {
        final_params: params,
        best_params,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::normalize;
    use crate::network::{build_network, ConvLayerSpec, NetworkSpec, ParameterStore};
    use crate::tensor::{ActivationKind, ImageGrid};

    fn tiny_spec() -> NetworkSpec {
        NetworkSpec::two_layer(8, 2)
    }

    fn store_with(v: f64) -> ParameterStore {
        let mut p = ParameterStore::zeros(&tiny_spec()).unwrap();
        for s in p.slices_mut() {
            s.fill(v);
        }
        p
    }

    #[test]
    fn plain_sgd_step() {
        let cfg = TrainConfig {
            lr0: 0.5,
            lr_decay: 0.0,
            momentum: 0.0,
            ..TrainConfig::paper(1)
        };
        let mut p = store_with(1.0);
        let g = store_with(0.5);
        let mut v = p.zeros_like();
        sgd_step(&mut p, &g, &mut v, 0, &cfg).unwrap();
        assert!(p.slices().iter().all(|s| s.iter().all(|&w| w == 0.75)));
    }

    #[test]
    fn momentum_accumulates() {
        let cfg = TrainConfig {
            lr0: 0.1,
            lr_decay: 0.0,
            momentum: 0.9,
            ..TrainConfig::paper(1)
        };
        let mut p = store_with(0.0);
        let g = store_with(1.0);
        let mut v = p.zeros_like();
        sgd_step(&mut p, &g, &mut v, 0, &cfg).unwrap();
        sgd_step(&mut p, &g, &mut v, 1, &cfg).unwrap();
        // v1 = -0.1, v2 = -0.09 - 0.1
        let w = p.output_biases[0];
        assert!((w - (-0.1 - 0.19)).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let cfg = TrainConfig::paper(1);
        let mut p = store_with(1.0);
        let other = ParameterStore::zeros(&NetworkSpec::two_layer(10, 2)).unwrap();
        let mut v = p.zeros_like();
        assert!(sgd_step(&mut p, &other, &mut v, 0, &cfg).is_err());
    }

    #[test]
    fn decay_law() {
        let cfg = TrainConfig::paper(1);
        assert_eq!(cfg.learning_rate(0), 0.5);
        assert!((cfg.learning_rate(1_000_000) - 1.0 / 3.0).abs() < 1e-15);
        let mut last = f64::INFINITY;
        for t in (0..10_000_000).step_by(100_003) {
            let lr = cfg.learning_rate(t);
            assert!(lr <= last);
            last = lr;
        }
    }

    #[test]
    fn always_stego_report() {
        let spec = tiny_spec();
        let mut p = ParameterStore::zeros(&spec).unwrap();
        p.output_biases = [0.0, 1.0];
        let items = (0..10)
            .map(|i| CorpusItem {
                image: ImageGrid::filled(8, 8, i as f64),
                label: i % 2,
                source_id: i as u64 / 2,
            })
            .collect();
        let corpus = normalize(Corpus::new(items)).unwrap();
        let r = evaluate(&p, &spec, &corpus).unwrap();
        assert_eq!(r.cover_accuracy(), 0.0);
        assert_eq!(r.stego_accuracy(), 1.0);
        assert_eq!(r.total_accuracy(), 0.5);
        assert_eq!(r.total(), 10);
    }

    #[test]
    fn report_layout() {
        let r = DetectionReport {
            confusion: [[9116, 884], [28, 9972]],
        };
        let text = r.render();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap().split_whitespace().collect::<Vec<_>>(),
            ["Cover", "Stego", "Total"]
        );
        assert_eq!(
            lines.next().unwrap().split_whitespace().collect::<Vec<_>>(),
            ["91.16%", "99.72%", "95.44%"]
        );
        assert!(r.csv_row().ends_with(",9116,884,28,9972"));
    }

    #[test]
    fn patience_stops_after_peak() {
        let mut h = TrainHistory::default();
        let mut stopped = None;
        for e in 1..=40 {
            let acc = if e <= 10 { e as f64 / 10.0 } else { 0.5 };
            h.push(EpochRecord {
                epoch: e,
                train_acc: 0.0,
                test_acc: acc,
                mean_loss: 0.0,
                lr: 0.0,
                seconds: 0.0,
            });
            if h.should_stop(5) {
                stopped = Some(e);
                break;
            }
        }
        assert_eq!(h.best_epoch, Some(10));
        assert_eq!(stopped, Some(15));
    }

    fn blob_corpus(n_pairs: usize, seed: u64) -> Corpus {
        // Two classes of 8x8 images: bright blob top-left vs bottom-right.
        let mut rng = SplitMix64::new(seed);
        let mut items = Vec::new();
        for i in 0..n_pairs {
            for label in [0, 1] {
                let (ci, cj) = if label == 0 { (2.0, 2.0) } else { (5.0, 5.0) };
                let img = ImageGrid::from_fn(8, 8, |r, c| {
                    let d2 = (r as f64 - ci).powi(2) + (c as f64 - cj).powi(2);
                    (128.0 + 100.0 * (-d2 / 4.0).exp() + 10.0 * rng.normal())
                        .round()
                        .clamp(0.0, 255.0)
                });
                items.push(CorpusItem {
                    image: img,
                    label,
                    source_id: i as u64,
                });
            }
        }
        Corpus::new(items)
    }

    #[test]
    fn learns_separable_blobs() {
        let spec = tiny_spec();
        let train_c = normalize(blob_corpus(50, 1)).unwrap();
        let test_c = blob_corpus(10, 2)
            .normalize_with(train_c.normalization().unwrap())
            .unwrap();
        let cfg = TrainConfig {
            batch_size: 10,
            max_epochs: 50,
            ..TrainConfig::paper(50)
        };
        let init = build_network(&spec, 3).unwrap();
        let out = train(&spec, init, &train_c, &test_c, &cfg).unwrap();
        let reached = out.history.epochs.iter().position(|r| r.train_acc == 1.0);
        assert!(reached.is_some(), "{:?}", out.history.epochs.last());
    }

    #[test]
    fn zero_epochs_returns_init() {
        let spec = tiny_spec();
        let c = normalize(blob_corpus(5, 1)).unwrap();
        let init = build_network(&spec, 3).unwrap();
        let cfg = TrainConfig {
            batch_size: 2,
            ..TrainConfig::paper(0)
        };
        let out = train(&spec, init.clone(), &c, &c, &cfg).unwrap();
        assert_eq!(out.final_params, init);
        assert_eq!(out.best_params, init);
        assert!(out.history.epochs.is_empty());
    }

    #[test]
    fn rejects_bad_corpora() {
        let spec = tiny_spec();
        let init = build_network(&spec, 3).unwrap();
        let raw = blob_corpus(5, 1);
        let norm = normalize(raw.clone()).unwrap();
        let cfg = TrainConfig {
            batch_size: 2,
            ..TrainConfig::paper(1)
        };
        assert!(train(&spec, init.clone(), &raw, &norm, &cfg).is_err());
        assert!(train(&spec, init.clone(), &Corpus::default(), &norm, &cfg).is_err());
        let big = TrainConfig { batch_size: 11, ..cfg };
        assert!(train(&spec, init, &norm, &norm, &big).is_err());
    }

    #[test]
    fn batch_gradient_is_mean_of_samples() {
        let spec = NetworkSpec {
            input_size: 8,
            conv_layers: vec![
                ConvLayerSpec::new(1, 3, ActivationKind::Tanh),
                ConvLayerSpec::new(3, 5, ActivationKind::Tanh),
            ],
        };
        let c = normalize(blob_corpus(12, 4)).unwrap();
        let p = build_network(&spec, 5).unwrap();
        let idx: Vec<usize> = (0..c.len()).rev().step_by(2).collect();
        let (batch, _) = batch_gradient(&p, &spec, &c.items, &idx).unwrap();
        let mut manual = p.zeros_like();
        for &i in &idx {
            manual.axpy(
                1.0,
                &crate::network::backward(&p, &spec, &c.items[i].image, c.items[i].label).unwrap(),
            );
        }
        manual.scale(1.0 / idx.len() as f64);
        for (a, b) in batch.slices().iter().zip(manual.slices()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() <= 1e-10 * y.abs().max(1e-12), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn training_is_deterministic_and_best_dominates() {
        let spec = tiny_spec();
        let tr = normalize(blob_corpus(20, 7)).unwrap();
        let te = blob_corpus(10, 8).normalize_with(tr.normalization().unwrap()).unwrap();
        let cfg = TrainConfig {
            batch_size: 8,
            lr0: 0.05,
            shuffle_seed: 3,
            ..TrainConfig::paper(6)
        };
        let a = train(&spec, build_network(&spec, 1).unwrap(), &tr, &te, &cfg).unwrap();
        let b = train(&spec, build_network(&spec, 1).unwrap(), &tr, &te, &cfg).unwrap();
        assert_eq!(a.history.to_csv(false), b.history.to_csv(false));
        assert_eq!(a.final_params, b.final_params);
        let best = evaluate(&a.best_params, &spec, &te).unwrap().total_accuracy();
        let fin = evaluate(&a.final_params, &spec, &te).unwrap().total_accuracy();
        assert!(best >= fin);
        assert_eq!(best, a.history.best().unwrap().test_acc);
        assert!(a.history.epochs.windows(2).all(|w| w[1].lr <= w[0].lr));
    }
}
