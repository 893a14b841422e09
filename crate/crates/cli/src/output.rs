//! Atomic artifact writing and the column manifest of every CSV produced.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tempfile::NamedTempFile;

use crate::CliError;

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let mut tmp =
        NamedTempFile::new_in(dir).map_err(|e| CliError::Io(format!("cannot stage {}: {e}", path.display())))?;
    tmp.write_all(bytes)
        .and_then(|_| tmp.flush())
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    tmp.persist(path)
        .map_err(|e| CliError::Io(format!("cannot move artifact into {}: {e}", path.display())))?;
    Ok(())
}

/// Collects artifacts of one run; `finish` writes `manifest.json`.
pub struct Artifacts {
    dir: PathBuf,
    columns: BTreeMap<String, Vec<String>>,
}

impl Artifacts {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Artifacts {
            dir: dir.into(),
            columns: BTreeMap::new(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        let path = self.dir.join(name);
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }

    /// CSV with the given header and rows of numbers.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<PathBuf, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| CliError::Io(e.to_string());
        w.write_record(header).map_err(err)?;
        for row in rows {
            w.write_record(row.iter().map(|v| v.to_string())).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        let path = self.dir.join(name);
        write_atomic(&path, &bytes)?;
        self.columns.insert(name.to_string(), header.iter().map(|s| s.to_string()).collect());
        Ok(path)
    }

    /// CSV bytes produced elsewhere.
    pub fn csv_bytes(&mut self, name: &str, header: &[&str], bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes)?;
        self.columns.insert(name.to_string(), header.iter().map(|s| s.to_string()).collect());
        Ok(path)
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        if self.columns.is_empty() {
            return Ok(());
        }
        let cols = std::mem::take(&mut self.columns);
        self.json("manifest.json", &cols)?;
        Ok(())
    }
}
