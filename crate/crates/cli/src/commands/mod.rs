//! Subcommand implementations. Each resolves its settings, validates them
//! before touching any model, then writes outputs atomically.

pub mod bench;
pub mod evaluate;
pub mod predict;
pub mod sample;
pub mod train;

use std::path::Path;

use hetgp_core::io::write_atomic;
use hetgp_core::synth::SyntheticScenario;
use serde::Serialize;

use crate::error::{CliResult, Classify};

/// Version of every report and sidecar document the CLI writes.
pub const REPORT_FORMAT_VERSION: u32 = 1;

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).runtime()?;
    text.push('\n');
    write_atomic(path, text.as_bytes()).runtime()
}

pub fn read_json(path: &Path) -> CliResult<serde_json::Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| crate::error::CliError::Invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| crate::error::CliError::Invalid(format!("{}: {e}", path.display())))
}

pub fn scenario(id: &str) -> CliResult<SyntheticScenario> {
    SyntheticScenario::resolve(id).invalid()
}
