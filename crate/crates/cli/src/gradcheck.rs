use std::fmt::Write as _;

use anyhow::anyhow;
use stegcnn::network::{gradient_suite, ClassCheck, GRADCHECK_TOLERANCE};
use stegcnn::{NetworkSpec, ParamClass};

use crate::{Classify, CliError, CliResult};

/// Largest side length accepted; finite differences cost one forward pass
/// per parameter.
pub const MAX_SIZE: usize = 16;
pub const MIN_SIZE: usize = 4;

#[derive(Debug, Clone)]
pub struct GradcheckOutcome {
    pub checks: Vec<ClassCheck>,
    pub text: String,
}

impl GradcheckOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed(GRADCHECK_TOLERANCE))
    }

    pub fn failing(&self) -> Vec<ParamClass> {
        self.checks
            .iter()
            .filter(|c| !c.passed(GRADCHECK_TOLERANCE))
            .map(|c| c.class)
            .collect()
    }
}

/// Compare backprop against finite differences on a small two-layer network
/// (`size x size` input, two kernels). A failing class is an error carrying
/// the full report; `perturb` corrupts one gradient entry of that class.
pub fn gradcheck(seed: u64, size: usize, perturb: Option<ParamClass>) -> CliResult<GradcheckOutcome> {
    if !(MIN_SIZE..=MAX_SIZE).contains(&size) {
        return Err(anyhow!(
            "gradcheck size must lie in {MIN_SIZE}..={MAX_SIZE}, got {size}"
        ))
        .usage();
    }
    let spec = NetworkSpec::two_layer(size, 2);
    let checks = gradient_suite(&spec, seed, perturb).failed()?;
    let mut text = format!("# seed={seed} size={size} tolerance={GRADCHECK_TOLERANCE:e}\n");
    for c in &checks {
        let verdict = if c.passed(GRADCHECK_TOLERANCE) { "PASS" } else { "FAIL" };
        let _ = writeln!(
            text,
            "{verdict} {:<16} params={:<4} max_rel_err={:.3e} worst_index={}",
            c.class.to_string(),
            c.checked,
            c.max_rel_err,
            c.worst_index
        );
    }
    let outcome = GradcheckOutcome { checks, text };
    if outcome.passed() {
        Ok(outcome)
    } else {
        let names: Vec<String> = outcome.failing().iter().map(ToString::to_string).collect();
        Err(CliError::Failed(anyhow!(
            "gradient check failed for {}\n{}",
            names.join(", "),
            outcome.text.trim_end()
        )))
    }
}
