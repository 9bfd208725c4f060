//! Ranked candidate generation in either direction.

mod adapter;
mod native;

use serde::Serialize;
use thiserror::Error;

pub use crate::templates::Direction;
pub use adapter::{AdapterGenerator, Endpoint};
pub use native::NativeGenerator;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationCandidate {
    /// Canonical dot-joined SMILES of the generated side.
    pub output: String,
    /// Higher is better; only comparable within one query.
    pub score: f64,
    /// 1-based.
    pub rank: usize,
}

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("cannot parse input '{0}': {1}")]
    BadInput(String, String),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("generator library is empty")]
    EmptyLibrary,
    #[error("adapter transport failed: {0}")]
    Transport(String),
    #[error("adapter protocol violation: {0}")]
    Protocol(String),
}

impl GeneratorError {
    /// True for failures of an external endpoint, as opposed to bad input.
    pub fn is_adapter_failure(&self) -> bool {
        matches!(self, GeneratorError::Transport(_) | GeneratorError::Protocol(_))
    }
}

pub trait Generator: Send + Sync {
    fn name(&self) -> &str;

    /// At most `k` candidates, deduplicated by canonical output and ordered
    /// by descending score, ties by canonical string.
    fn generate(
        &self,
        input: &str,
        direction: Direction,
        k: usize,
    ) -> Result<Vec<GenerationCandidate>, GeneratorError> {
        let mut out = self.generate_batch(&[input.to_string()], direction, k)?;
        Ok(out.pop().unwrap_or_default())
    }

    /// One candidate list per input, in input order.
    fn generate_batch(
        &self,
        inputs: &[String],
        direction: Direction,
        k: usize,
    ) -> Result<Vec<Vec<GenerationCandidate>>, GeneratorError>;

    /// Output lines discarded so far because they did not parse.
    fn dropped_lines(&self) -> usize {
        0
    }
}

/// Routes each request to the generator configured for its direction.
pub struct ByDirection {
    pub forward: std::sync::Arc<dyn Generator>,
    pub retro: std::sync::Arc<dyn Generator>,
}

impl ByDirection {
    pub fn get(&self, direction: Direction) -> &dyn Generator {
        match direction {
            Direction::Forward => self.forward.as_ref(),
            Direction::Retro => self.retro.as_ref(),
        }
    }
}

impl Generator for ByDirection {
    fn name(&self) -> &str {
        "by-direction"
    }

    fn generate_batch(
        &self,
        inputs: &[String],
        direction: Direction,
        k: usize,
    ) -> Result<Vec<Vec<GenerationCandidate>>, GeneratorError> {
        self.get(direction).generate_batch(inputs, direction, k)
    }

    fn dropped_lines(&self) -> usize {
        if std::sync::Arc::ptr_eq(&self.forward, &self.retro) {
            self.forward.dropped_lines()
        } else {
            self.forward.dropped_lines() + self.retro.dropped_lines()
        }
    }
}

/// Sorts by descending score then output, keeps the best-scored copy of
/// each output, truncates to `k` and assigns ranks.
pub(crate) fn rank_candidates(mut scored: Vec<(String, f64)>, k: usize) -> Vec<GenerationCandidate> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut seen = std::collections::HashSet::new();
    scored
        .into_iter()
        .filter(|(s, _)| seen.insert(s.clone()))
        .take(k)
        .enumerate()
        .map(|(i, (output, score))| GenerationCandidate { output, score, rank: i + 1 })
        .collect()
}
