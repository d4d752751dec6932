use std::fmt;

use lipbarrier_core::Error;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExitKind {
    Pass = 0,
    Verification = 1,
    Config = 2,
    Numerical = 3,
}

impl ExitKind {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ExitKind::Pass => "pass",
            ExitKind::Verification => "verification_failure",
            ExitKind::Config => "config_error",
            ExitKind::Numerical => "numerical_failure",
        }
    }
}

/// A failure tagged with the stage it happened in.
#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub stage: String,
    pub source: anyhow::Error,
}

impl CliError {
    pub fn config(msg: impl fmt::Display) -> Self {
        CliError {
            kind: ExitKind::Config,
            stage: "config".into(),
            source: anyhow::anyhow!("{msg}"),
        }
    }

    /// A core error raised while validating configuration values.
    pub fn core_config(e: Error) -> Self {
        CliError {
            kind: ExitKind::Config,
            stage: "config".into(),
            source: e.into(),
        }
    }

    pub fn io(e: impl Into<anyhow::Error>) -> Self {
        CliError {
            kind: ExitKind::Numerical,
            stage: "io".into(),
            source: e.into(),
        }
    }

    /// Classifies a core error raised during `stage`.
    pub fn core(stage: &str, e: Error) -> Self {
        let kind = match &e {
            Error::InvalidThreshold { .. } | Error::InvalidParameter { .. } => ExitKind::Config,
            Error::VerificationFailed { .. } | Error::ExteriorBallViolation { .. } | Error::Precondition { .. } => {
                ExitKind::Verification
            }
            _ => ExitKind::Numerical,
        };
        let stage = match &e {
            Error::VerificationFailed { stage: inner, .. } => format!("{stage}/{inner}"),
            _ => stage.to_string(),
        };
        CliError {
            kind,
            stage,
            source: e.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.stage, self.source)
    }
}

impl std::error::Error for CliError {}
