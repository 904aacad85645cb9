//! Process-level error classification.
//!
//! Every failure a subcommand can hit folds into one of three exit codes:
//! `1` for validation problems (bad flags, bad config, malformed or
//! inconsistent inputs), `2` for inputs that simply are not there, and `3`
//! for runtime failures (numeric blow-ups, unreachable services, I/O that
//! broke mid-flight). Success is `0`. The conversions below encode that
//! judgment once so the subcommands never hand-pick codes.

use std::fmt;
use std::io::ErrorKind;
use std::path::Path;

use stylekit::audio::AudioError;
use stylekit::augment::AugmentError;
use stylekit::corpus::CorpusError;
use stylekit::emotion::client::ClientError;
use stylekit::emotion::LabelError;
use stylekit::eval::EvalError;
use stylekit::style::StyleError;

/// A subcommand failure, bucketed by exit code.
#[derive(Debug)]
pub enum CliError {
    /// The command or its inputs are malformed; exit code 1.
    Validation(String),
    /// A required input file or directory does not exist; exit code 2.
    MissingInput(String),
    /// The pipeline itself failed at runtime; exit code 3.
    Runtime(String),
}

impl CliError {
    /// The process exit code for this failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::MissingInput(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    /// Classifies an I/O error on a known path: absent files are missing
    /// inputs, anything else is a runtime failure.
    pub fn from_io(path: &Path, source: &std::io::Error) -> CliError {
        if source.kind() == ErrorKind::NotFound {
            CliError::MissingInput(format!("{}: {source}", path.display()))
        } else {
            CliError::Runtime(format!("{}: {source}", path.display()))
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(message) => write!(f, "error: {message}"),
            CliError::MissingInput(message) => write!(f, "error: missing input: {message}"),
            CliError::Runtime(message) => write!(f, "error: {message}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CorpusError> for CliError {
    fn from(err: CorpusError) -> Self {
        match &err {
            CorpusError::Io { path, source } => CliError::from_io(path, source),
            _ => CliError::Validation(err.to_string()),
        }
    }
}

impl From<LabelError> for CliError {
    fn from(err: LabelError) -> Self {
        match &err {
            LabelError::Io { path, source } => CliError::from_io(path, source),
            _ => CliError::Validation(err.to_string()),
        }
    }
}

impl From<ClientError> for CliError {
    fn from(err: ClientError) -> Self {
        match &err {
            // A request we built wrong is on us; everything else is the
            // service misbehaving.
            ClientError::InvalidRequest => CliError::Validation(err.to_string()),
            _ => CliError::Runtime(err.to_string()),
        }
    }
}

impl From<AudioError> for CliError {
    fn from(err: AudioError) -> Self {
        match &err {
            AudioError::Io { path, source } => CliError::from_io(path, source),
            _ => CliError::Validation(err.to_string()),
        }
    }
}

impl From<AugmentError> for CliError {
    fn from(err: AugmentError) -> Self {
        match err {
            AugmentError::Io { ref path, ref source } => CliError::from_io(path, source),
            AugmentError::Audio(inner) => inner.into(),
            AugmentError::Corpus(inner) => inner.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<StyleError> for CliError {
    fn from(err: StyleError) -> Self {
        match &err {
            StyleError::Io { path, source } => CliError::from_io(path, source),
            // Numeric failures mean the computation itself went off the
            // rails, not that the user asked for something malformed.
            StyleError::NonFinite { .. } | StyleError::ZeroNormView { .. } => {
                CliError::Runtime(err.to_string())
            }
            _ => CliError::Validation(err.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(err: EvalError) -> Self {
        match &err {
            EvalError::Io { path, source } => CliError::from_io(path, source),
            EvalError::NonFinite { .. } => CliError::Runtime(err.to_string()),
            _ => CliError::Validation(err.to_string()),
        }
    }
}
