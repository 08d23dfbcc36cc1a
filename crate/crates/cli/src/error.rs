use std::io;
use std::path::Path;

use argus_core::arbitration::ArbitrationError;
use argus_core::disagreement::DisagreementError;
use argus_core::disengagement::EvalError;
use argus_core::preprocessing::PreprocessError;
use argus_core::streams::StreamError;
use argus_core::synthgen::SynthError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Arbitration(#[from] ArbitrationError),
    #[error(transparent)]
    Disagreement(#[from] DisagreementError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("{}: {source}", path.display())]
    Io { path: std::path::PathBuf, source: io::Error },
    #[error("replay mismatch: {0}")]
    Mismatch(String),
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 for bad input, 3 for an infeasible generator spec, 4 when an
    /// internal check fails.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Synth(SynthError::Infeasible(_)) => 3,
            CliError::Synth(SynthError::Internal(_)) | CliError::Mismatch(_) => 4,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
