use std::fmt;
use std::path::Path;

/// A failed command: 1 for bad configuration, validation failures and
/// failed checks, 2 for runtime, I/O and parse errors.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl fmt::Display) -> Self {
        CliError {
            code: 1,
            message: message.to_string(),
        }
    }

    pub fn runtime(message: impl fmt::Display) -> Self {
        CliError {
            code: 2,
            message: message.to_string(),
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self::runtime(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn read(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write(path: &Path, data: impl AsRef<[u8]>) -> CliResult<()> {
    std::fs::write(path, data).map_err(|e| CliError::io(path, e))
}
