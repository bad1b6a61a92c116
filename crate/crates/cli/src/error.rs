//! Command errors, exit codes and the JSON error record written to stderr.

use serde::Serialize;

use kinema::control_signal::SignalError;
use kinema::curation::CurationError;
use kinema::image_io::ImageError;
use kinema::kinematics::{ActionsError, KinematicsError};
use kinema::metrics::MetricsError;
use kinema::projection::{ProjectionError, TensorError};
use kinema::robot_model::{GeometryError, ModelError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{kind}: {message}")]
    Input { kind: String, message: String },
    #[error("internal error: {0}")]
    Internal(String),
}

/// One line of JSON on stderr describing a failed run.
#[derive(Debug, Serialize)]
pub struct ErrorRecord<'a> {
    pub error: &'a str,
    pub message: String,
    pub exit_code: i32,
}

impl CliError {
    pub fn input(kind: &str, message: impl std::fmt::Display) -> Self {
        CliError::Input {
            kind: kind.to_string(),
            message: message.to_string(),
        }
    }

    pub fn missing(option: &str) -> Self {
        CliError::Usage(format!("missing required option --{}", option.replace('_', "-")))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Input { .. } => EXIT_INPUT,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }

    pub fn kind(&self) -> &str {
        match self {
            CliError::Usage(_) => "Usage",
            CliError::Input { kind, .. } => kind,
            CliError::Internal(_) => "Internal",
        }
    }

    pub fn record(&self) -> String {
        let message = match self {
            CliError::Input { message, .. } => message.clone(),
            other => other.to_string(),
        };
        serde_json::to_string(&ErrorRecord {
            error: self.kind(),
            message,
            exit_code: self.exit_code(),
        })
        .expect("error record serializes")
    }
}

macro_rules! input_error_with_kind {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::input(e.kind(), &e)
            }
        }
    )*};
}

input_error_with_kind!(
    ModelError,
    KinematicsError,
    ProjectionError,
    SignalError,
    CurationError,
    MetricsError
);

macro_rules! input_error {
    ($($t:ty => $kind:expr),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::input($kind, &e)
            }
        }
    )*};
}

input_error!(
    TensorError => "InvalidTensor",
    ImageError => "InvalidImage",
    ActionsError => "InvalidActions",
    GeometryError => "InvalidGeometry",
    std::io::Error => "IoFailure"
);
