//! Fixed-key vs per-image-key detection on procedural 32x32 covers.
//!
//! ```text
//! cargo run --release -p stegcnn-core --example desk_experiment -- [fixed|per_image] [alpha] [epochs] [pairs]
//! ```
//!
//! Environment overrides: `LEVEL`, `GRAD`, `WAVE`, `NOISE` take `lo,hi`
//! ranges for the cover style; `SEED` offsets every seed; `EVAL_ALPHA`
//! re-embeds the test covers at another payload and scores the best network
//! on them.

use stegcnn::dataset::{split_pairs, synth_covers_with, CoverStyle};
use stegcnn::trainer::{evaluate, train_with};
use stegcnn::{assemble, build_network, embed, Algorithm, ImageGrid, KeyMode, NetworkSpec, StegoConfig, TrainConfig};

fn stegos(covers: &[ImageGrid], cfg: &StegoConfig) -> stegcnn::Result<Vec<ImageGrid>> {
    covers
        .iter()
        .enumerate()
        .map(|(i, c)| embed(c, &cfg.for_image(i as u64)).map(|r| r.stego))
        .collect()
}

fn main() -> stegcnn::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let off: u64 = std::env::var("SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(0);
    let key = match args.get(1).map(String::as_str) {
        Some("per_image") => KeyMode::PerImage { master_seed: 11 + off },
        _ => KeyMode::Fixed { seed: 11 + off },
    };
    let alpha: f64 = args.get(2).and_then(|a| a.parse().ok()).unwrap_or(0.4);
    let epochs: usize = args.get(3).and_then(|a| a.parse().ok()).unwrap_or(200);
    let pairs: usize = args.get(4).and_then(|a| a.parse().ok()).unwrap_or(1000);

    let env = |k: &str, d: (f64, f64)| -> (f64, f64) {
        std::env::var(k)
            .ok()
            .and_then(|v| v.split_once(',').map(|(a, b)| (a.parse().unwrap(), b.parse().unwrap())))
            .unwrap_or(d)
    };
    let dflt = CoverStyle::default();
    let style = CoverStyle {
        level: env("LEVEL", dflt.level),
        gradient: env("GRAD", dflt.gradient),
        wave: env("WAVE", dflt.wave),
        noise: env("NOISE", dflt.noise),
        ..dflt
    };
    println!("{style:?}");
    let covers = synth_covers_with(1 + off, pairs, 32, &style);
    let cfg = StegoConfig::new(Algorithm::LsbMatching, alpha, key, 7 + off)?;
    let (train, test) = assemble(&covers, &stegos(&covers, &cfg)?, 0.8, 3 + off)?;
    let spec = NetworkSpec::desk();
    let tc = TrainConfig {
        max_epochs: epochs,
        shuffle_seed: 5 + off,
        ..TrainConfig::paper(epochs)
    };
    let out = train_with(&spec, build_network(&spec, 1 + off)?, &train, &test, &tc, |r| {
        println!(
            "{:>4} train {:.4} test {:.4} loss {:.5} ({:.2}s)",
            r.epoch, r.train_acc, r.test_acc, r.mean_loss, r.seconds
        )
    })?;
    let best = out.history.best().expect("at least one epoch");
    println!("best epoch {} test {:.4}", best.epoch, best.test_acc);

    if let Some(eval_alpha) = std::env::var("EVAL_ALPHA").ok().and_then(|s| s.parse::<f64>().ok()) {
        let stats = train.normalization().expect("assembled corpora are normalized");
        let other = stegos(&covers, &cfg.with_payload(eval_alpha))?;
        let (_, raw) = split_pairs(&covers, &other, 0.8, 3 + off)?;
        let shifted = evaluate(&out.best_params, &spec, &raw.normalize_with(stats)?)?;
        let own = evaluate(&out.best_params, &spec, &test)?;
        println!(
            "stego accuracy at {alpha}: {:.4}; at {eval_alpha}: {:.4}",
            own.stego_accuracy(),
            shifted.stego_accuracy()
        );
    }
    Ok(())
}
