use std::fmt;
use std::path::Path;

use serde::de::DeserializeOwned;
use sha2::{Digest, Sha256};

use crate::report::RunReport;

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable or malformed input, or inconsistent arguments: exit 2.
    Usage(String),
    /// The inputs parse but violate a domain precondition: exit 1.
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Domain(m) => write!(f, "{m}"),
        }
    }
}

impl From<stoqlift::Error> for CliError {
    fn from(e: stoqlift::Error) -> Self {
        use stoqlift::Error as E;
        match e {
            E::Parse(_) | E::NotSquare { .. } | E::DimensionMismatch { .. } | E::InvalidArgument(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Domain(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Reads and parses a JSON input, recording its digest under `key`.
pub fn load<T: DeserializeOwned>(report: &mut RunReport, key: &str, path: &Path) -> CliResult<T> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    report.inputs.insert(key.to_string(), hex::encode(Sha256::digest(&bytes)));
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| CliError::Usage(format!("{} is not UTF-8: {e}", path.display())))?;
    stoqlift::formats::from_json(text)
        .map_err(|e| CliError::Usage(format!("cannot parse {}: {e}", path.display())))
}

pub fn write(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}
