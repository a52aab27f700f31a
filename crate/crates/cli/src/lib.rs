//! Commands behind the `stegcnn` binary: corpus generation, training,
//! evaluation and the gradient self-check.
//!
//! Every artifact starts with `# key=value` provenance lines (configuration
//! digest and all seeds) and contains no filesystem paths, so two runs of
//! one configuration write byte-identical files wherever they run.

pub mod config;
mod corpus;
mod eval;
mod generate;
mod gradcheck;
mod train;

use std::fmt;

pub use config::ExperimentConfig;
pub use eval::{eval, EvalArgs, EvalOutcome, Split};
pub use generate::{generate, generate_batch, GenerateSummary};
pub use gradcheck::{gradcheck, GradcheckOutcome};
pub use train::{train, TrainSummary};

/// File names inside the output directory.
pub mod layout {
    pub const CORPUS: &str = "corpus.txt";
    pub const MODIFICATIONS: &str = "modifications.csv";
    pub const BATCH_MODIFICATIONS: &str = "batch_modifications.csv";
    pub const COVER_DIR: &str = "covers";
    pub const STEGO_DIR: &str = "stego";
    pub const HISTORY: &str = "history.csv";
    pub const FINAL_CHECKPOINT: &str = "checkpoint_final.json";
    pub const BEST_CHECKPOINT: &str = "checkpoint_best.json";
    pub const TRAIN_REPORT: &str = "train_report.txt";
}

/// A failed command, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, configuration or input data (exit code 2).
    Usage(anyhow::Error),
    /// A verification did not pass, or the work itself failed (exit code 1).
    Failed(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (CliError::Usage(e) | CliError::Failed(e)) = self;
        // Core errors already quote their cause; skip causes that repeat.
        let mut shown = e.to_string();
        write!(f, "{shown}")?;
        for cause in e.chain().skip(1) {
            let c = cause.to_string();
            if !shown.contains(&c) {
                write!(f, ": {c}")?;
                shown = c;
            }
        }
        Ok(())
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;

pub(crate) trait Classify<T> {
    fn usage(self) -> CliResult<T>;
    fn failed(self) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn usage(self) -> CliResult<T> {
        self.map_err(|e| CliError::Usage(e.into()))
    }

    fn failed(self) -> CliResult<T> {
        self.map_err(|e| CliError::Failed(e.into()))
    }
}
