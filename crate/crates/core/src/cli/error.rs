use std::process::ExitCode;

use thiserror::Error;

/// Failure of a command, classified for the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid or unreadable configuration: exit code 2.
    #[error("config error: {0}")]
    Config(String),
    /// Malformed or inconsistent input data: exit code 3.
    #[error("data error: {0}")]
    Data(String),
    /// A pipeline stage failed at run time: exit code 4.
    #[error("stage `{stage}` failed: {message}")]
    Stage { stage: &'static str, message: String },
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Stage { .. } => 4,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code())
    }

    pub fn config(e: impl std::fmt::Display) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn data(e: impl std::fmt::Display) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Attaches a stage name to any displayable error.
pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> CliResult<T>;
}

impl<T, E: std::fmt::Display> StageExt<T> for Result<T, E> {
    fn stage(self, stage: &'static str) -> CliResult<T> {
        self.map_err(|e| CliError::Stage { stage, message: e.to_string() })
    }
}

/// Writes a file, reporting the path on failure.
pub fn write_file(path: &std::path::Path, bytes: impl AsRef<[u8]>) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::Stage { stage: "write", message: format!("{}: {e}", path.display()) })
}

pub fn create_dir(path: &std::path::Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::Stage { stage: "write", message: format!("{}: {e}", path.display()) })
}

pub fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

/// `value` as a JSON object with a top-level `seed` key added if missing.
pub fn seeded<T: serde::Serialize>(value: &T, seed: u64) -> serde_json::Value {
    let mut v = serde_json::to_value(value).expect("serializable value");
    if let serde_json::Value::Object(m) = &mut v {
        m.entry("seed").or_insert(seed.into());
    }
    v
}
