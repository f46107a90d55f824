use std::path::PathBuf;

use thiserror::Error;

use crate::config::ConfigErrors;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config:\n{0}")]
    Config(ConfigErrors),
    #[error("aborted at iteration {iteration}: {source}")]
    ZeroEvidence {
        iteration: usize,
        source: qprior::Error,
    },
    #[error(transparent)]
    Run(qprior::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 config or input error, 2 zero-evidence abort, 3 I/O error.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Run(_) => 1,
            CliError::ZeroEvidence { .. } => 2,
            CliError::Io { .. } => 3,
        }
    }
}

impl From<qprior::Error> for CliError {
    fn from(e: qprior::Error) -> Self {
        match e {
            qprior::Error::Aborted { iteration, source } if source.is_zero_evidence() => {
                CliError::ZeroEvidence {
                    iteration,
                    source: *source,
                }
            }
            other => CliError::Run(other),
        }
    }
}
