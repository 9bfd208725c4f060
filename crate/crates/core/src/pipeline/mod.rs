//! The self-boosting loop: build a template library, generate in-silico
//! reactions from unpaired molecules, filter them, and assemble augmented
//! training corpora, one versioned directory per iteration.

mod boost;
mod config;
mod eval;

use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub use boost::{
    boost, generate_candidates, read_unpaired, AttributionStage, BoostOptions, DedupStage, FilterStage,
    GenerationReport, InputStage, IterationManifest, LibraryStage, RunManifest,
};
pub use config::{
    AugmentConfig, FilterSection, GeneratorConfig, PathsConfig, PipelineConfig, RunConfig, TemplatesConfig, WORKDIR_ENV,
};
pub use eval::{predict, run_eval, EvalReport, RareSlice};

use crate::augment::{CorpusError, IngestError};
use crate::evalkit::EvalError;
use crate::filter::FilterError;
use crate::generator::GeneratorError;
use crate::templates::LibraryError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Usage(String),
    #[error("workdir {} is not empty", .0.display())]
    WorkdirNotEmpty(PathBuf),
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl PipelineError {
    /// 1 usage, 2 data, 3 adapter.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Usage(_) | PipelineError::WorkdirNotEmpty(_) => 1,
            PipelineError::Generator(e) if e.is_adapter_failure() => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> PipelineError {
        let path = path.into();
        move |source| PipelineError::Io { path, source }
    }
}

impl From<IngestError> for PipelineError {
    fn from(e: IngestError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<LibraryError> for PipelineError {
    fn from(e: LibraryError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<CorpusError> for PipelineError {
    fn from(e: CorpusError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<EvalError> for PipelineError {
    fn from(e: EvalError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<FilterError> for PipelineError {
    fn from(e: FilterError) -> Self {
        match e {
            FilterError::Inverse { error, .. } => PipelineError::Generator(error),
            other => PipelineError::Data(other.to_string()),
        }
    }
}
