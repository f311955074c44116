//! CSV and JSON emission. CSV headers are fixed per experiment type and
//! float formatting uses the shortest round-trip representation, so outputs
//! are byte-identical for identical configurations and seeds.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

pub fn fnum(v: f64) -> String {
    format!("{}", v)
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<S: Serialize>(path: &Path, summary: &S) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let text = serde_json::to_string_pretty(summary)?;
    std::fs::write(path, text + "\n")
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// Top-level JSON summary wrapper with a schema version and the fully
/// resolved configuration.
#[derive(Serialize)]
pub struct Summary<R: Serialize> {
    pub schema_version: u32,
    pub command: String,
    pub config: crate::config::RunConfig,
    pub result: R,
}

impl<R: Serialize> Summary<R> {
    pub fn new(command: &str, config: crate::config::RunConfig, result: R) -> Self {
        Self {
            schema_version: 1,
            command: command.to_string(),
            config,
            result,
        }
    }
}
