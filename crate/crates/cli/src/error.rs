use std::process::ExitCode;

use lfx_core::landmark_data::ParseError;
use lfx_core::models::ModelError;
use lfx_core::pipeline::PipelineError;
use lfx_core::preprocess::PreprocessError;
use thiserror::Error;

/// Exit code 1 for bad data or numerics, 2 for environment and I/O failures.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Data(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> CliError {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Data(_) => ExitCode::from(1),
            CliError::Io { .. } => ExitCode::from(2),
        }
    }
}

impl From<ParseError> for CliError {
    fn from(e: ParseError) -> Self {
        match e {
            ParseError::Io(source) => CliError::io("reading landmark data", source),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<PreprocessError> for CliError {
    fn from(e: PreprocessError) -> Self {
        match e {
            PreprocessError::Io(source) => CliError::io("segment store", source),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Io(source) => CliError::io("checkpoint", source),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Model(m) => m.into(),
            PipelineError::Raster(lfx_core::raster::RasterError::Io(source)) => CliError::io("raster", source),
            other => CliError::Data(other.to_string()),
        }
    }
}
