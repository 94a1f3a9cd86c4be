//! Stage-tagged pipeline errors mapped onto process exit codes.

use std::fmt;

/// Pipeline stage a failure is attributed to; prefixes every log line and
/// error message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Synth,
    Ingest,
    Featurize,
    Select,
    Windows,
    Train,
    Evaluate,
    Report,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Synth => "synth",
            Stage::Ingest => "ingest",
            Stage::Featurize => "featurize",
            Stage::Select => "select",
            Stage::Windows => "windows",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad or inconsistent configuration; exit code 2.
    Config,
    /// Unreadable or malformed input data; exit code 3.
    Data,
    /// Runtime or numeric failure during processing; exit code 4.
    Runtime,
}

#[derive(Debug, Clone)]
pub struct CliError {
    pub stage: Stage,
    pub kind: ErrorKind,
    pub detail: String,
}

impl CliError {
    pub fn config(stage: Stage, detail: impl Into<String>) -> Self {
        CliError { stage, kind: ErrorKind::Config, detail: detail.into() }
    }

    pub fn data(stage: Stage, detail: impl Into<String>) -> Self {
        CliError { stage, kind: ErrorKind::Data, detail: detail.into() }
    }

    pub fn runtime(stage: Stage, detail: impl Into<String>) -> Self {
        CliError { stage, kind: ErrorKind::Runtime, detail: detail.into() }
    }

    /// Wrap a core error occurring in `stage`. Invalid-config shapes map to
    /// the config exit code, malformed-record shapes to the data code, and
    /// everything else to the runtime code.
    pub fn from_core(stage: Stage, err: solvencylab_core::CoreError) -> Self {
        use solvencylab_core::CoreError as E;
        let kind = match &err {
            E::InvalidConfig { .. } | E::InfeasibleSynthConfig { .. } => ErrorKind::Config,
            E::InvalidRecord { .. } => ErrorKind::Data,
            _ => ErrorKind::Runtime,
        };
        CliError { stage, kind, detail: err.to_string() }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Runtime => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.stage, self.detail)
    }
}

impl std::error::Error for CliError {}
