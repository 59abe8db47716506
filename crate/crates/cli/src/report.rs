use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Wrapper written around every JSON report.
#[derive(Debug, Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub schema_version: u32,
    pub command: &'a str,
    pub tool_version: &'a str,
    pub config_hash: &'a str,
    pub seed: u64,
    pub report: T,
}

pub fn envelope<'a, T: Serialize>(command: &'a str, config_hash: &'a str, seed: u64, report: T) -> Envelope<'a, T> {
    Envelope {
        schema_version: REPORT_SCHEMA_VERSION,
        command,
        tool_version: env!("CARGO_PKG_VERSION"),
        config_hash,
        seed,
        report,
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(format!("serializing report: {e}")))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("cannot create output directory {}: {e}", dir.display())))
}

/// Writes `value` as pretty JSON to `dir/name`.
pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    ensure_dir(dir)?;
    let path = dir.join(name);
    let mut text = to_json(value)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))?;
    Ok(path)
}
