//! Output plumbing: atomic writes, calibration-table resolution, run manifests.
//!
//! Every file is written through a temp file in the destination directory and
//! renamed into place, so a crashed run never leaves a truncated artifact.
//! Manifests deliberately carry no timestamps: a rerun with the same seed and
//! calibration table must be byte-identical.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use hermite_dpp::rmt::CalibrationTable;

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("temp file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path)
        .map_err(|e| e.error)
        .with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut buf = serde_json::to_vec_pretty(value)?;
    buf.push(b'\n');
    write_atomic(path, &buf)
}

pub fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    Ok(w.into_inner()?)
}

/// Where the calibration table came from, for the manifest.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "source", content = "path", rename_all = "kebab-case")]
pub enum TableSource {
    Flag(PathBuf),
    Env(PathBuf),
    InMemory,
}

/// Resolution order: `--calibration` flag, then `$HERMITE_DPP_CALIBRATION`,
/// then a fresh in-memory table that calibrates lazily.
pub fn load_calibration(flag: Option<&Path>) -> Result<(CalibrationTable, TableSource)> {
    let source = match flag {
        Some(p) => Some((p.to_path_buf(), true)),
        None => std::env::var_os("HERMITE_DPP_CALIBRATION").map(|v| (PathBuf::from(v), false)),
    };
    match source {
        Some((path, from_flag)) => {
            let raw = fs::read(&path)
                .with_context(|| format!("reading calibration table {}", path.display()))?;
            let table: CalibrationTable = serde_json::from_slice(&raw)
                .with_context(|| format!("parsing calibration table {}", path.display()))?;
            let src =
                if from_flag { TableSource::Flag(path) } else { TableSource::Env(path) };
            Ok((table, src))
        }
        None => Ok((CalibrationTable::new(), TableSource::InMemory)),
    }
}

pub fn table_sha256(table: &CalibrationTable) -> Result<String> {
    let bytes = serde_json::to_vec(table)?;
    let mut h = Sha256::new();
    h.update(&bytes);
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// Sidecar describing one run: tool/git identity, echoed config, calibration
/// provenance, and the files produced.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub git: String,
    pub command: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub calibration: Option<TableSource>,
    /// SHA-256 of the table as used (after any lazy fills), hex encoded.
    pub calibration_sha256: Option<String>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, seed: Option<u64>, config: impl Serialize) -> Result<Self> {
        Ok(Self {
            tool: format!("hermite-dpp {}", env!("CARGO_PKG_VERSION")),
            git: env!("HERMITE_DPP_GIT").to_string(),
            command: command.to_string(),
            seed,
            config: serde_json::to_value(config)?,
            calibration: None,
            calibration_sha256: None,
            outputs: Vec::new(),
        })
    }

    pub fn with_table(mut self, source: TableSource, table: &CalibrationTable) -> Result<Self> {
        self.calibration = Some(source);
        self.calibration_sha256 = Some(table_sha256(table)?);
        Ok(self)
    }

    pub fn output(mut self, path: &Path) -> Self {
        self.outputs.push(path.display().to_string());
        self
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json_atomic(path, self)
    }
}

/// `foo.csv` → `foo.<suffix>.json` in the same directory.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}.{suffix}.json"))
}
