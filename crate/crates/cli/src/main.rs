use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stegcnn::ParamClass;
use stegcnn_cli::{CliError, CliResult, EvalArgs, ExperimentConfig, Split};

/// CNN steganalysis workbench.
///
/// Exit codes: 0 success, 1 verification or run failure, 2 usage,
/// configuration or input error.
#[derive(Parser)]
#[command(name = "stegcnn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// `key = value` configuration file; defaults apply to missing keys.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override one configuration key (repeatable), applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> CliResult<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p),
            None => Ok(ExperimentConfig::default()),
        }
        .map_err(CliError::Usage)?;
        cfg.apply_overrides(self.sets.iter().map(String::as_str))
            .map_err(CliError::Usage)?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize covers and embed stego twins under the output directory.
    Generate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Embed the jobs of a batch manifest instead of synthesizing a corpus.
        #[arg(long)]
        batch: Option<PathBuf>,
    },
    /// Train the detector on a generated corpus.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Corpus manifest (default: <output_dir>/corpus.txt).
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Print one line per epoch.
        #[arg(long)]
        verbose: bool,
    },
    /// Classify a corpus with a checkpoint and print the detection report.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// train, test or all.
        #[arg(long, default_value = "all")]
        split: Split,
        /// Re-embed the stego images at this payload before evaluating.
        #[arg(long)]
        payload: Option<f64>,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Emit CSV (header and one row) instead of the table.
        #[arg(long)]
        csv: bool,
    },
    /// Check backpropagation against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Input side length (4 to 16).
        #[arg(long, default_value_t = 8)]
        size: usize,
        /// Test hook: corrupt one gradient entry of this parameter class.
        #[arg(long, value_name = "CLASS")]
        perturb: Option<ParamClass>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate { config, batch } => {
            let cfg = config.resolve()?;
            match batch {
                Some(b) => {
                    let n = stegcnn_cli::generate_batch(&cfg, &b)?;
                    println!("embedded {n} images into {}", cfg.output_dir.display());
                }
                None => {
                    let s = stegcnn_cli::generate(&cfg)?;
                    println!(
                        "wrote {} cover/stego pairs to {} (mean modified pixels {:.2})",
                        s.count,
                        cfg.output_dir.display(),
                        s.mean_modified
                    );
                }
            }
        }
        Command::Train {
            config,
            corpus,
            verbose,
        } => {
            let cfg = config.resolve()?;
            let s = stegcnn_cli::train(&cfg, corpus.as_deref(), |r| {
                if verbose {
                    println!(
                        "epoch {:>4}  loss {:.5}  train {:.4}  test {:.4}",
                        r.epoch, r.mean_loss, r.train_acc, r.test_acc
                    );
                }
            })?;
            println!(
                "{} epochs; best epoch {} with test accuracy {:.4}",
                s.epochs, s.best_epoch, s.best_test_accuracy
            );
        }
        Command::Eval {
            checkpoint,
            corpus,
            split,
            payload,
            out,
            csv,
        } => {
            let o = stegcnn_cli::eval(&EvalArgs {
                checkpoint,
                corpus,
                split,
                payload,
                out,
                csv,
            })?;
            print!("{}", o.text);
        }
        Command::Gradcheck { seed, size, perturb } => {
            let o = stegcnn_cli::gradcheck(seed, size, perturb)?;
            print!("{}", o.text);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
