//! Run directory layout and table writers.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use aoce_core::FiniteMdp;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::CliError;

pub struct RunDir {
    path: PathBuf,
    digest: String,
}

impl RunDir {
    /// Creates the directory and writes `config.echo`.
    pub fn create(path: &Path, config: &ExperimentConfig) -> Result<Self, CliError> {
        fs::create_dir_all(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let run = Self {
            path: path.to_path_buf(),
            digest: config.digest(),
        };
        fs::write(run.file("config.echo"), config.to_toml())?;
        Ok(run)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    /// Writes a CSV table whose first line names the config digest.
    pub fn write_csv(&self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut file = BufWriter::new(File::create(self.file(name))?);
        writeln!(file, "# config sha256 {}", self.digest)?;
        let mut w = csv::Writer::from_writer(file);
        let io = |e: csv::Error| CliError::Io(e.to_string());
        w.write_record(header).map_err(io)?;
        for row in rows {
            w.write_record(row).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        fs::write(self.file(name), text + "\n")?;
        Ok(())
    }
}

/// Content hash of a kernel: SHA-256 over its state count and checksum.
#[derive(Debug, Clone, Serialize)]
pub struct MdpHash {
    pub states: usize,
    pub checksum: String,
    pub hash: String,
}

impl MdpHash {
    pub fn of(mdp: &FiniteMdp) -> Self {
        let checksum = format!("{:016x}", mdp.checksum());
        let text = format!("states {}\nchecksum {checksum}\n", mdp.len());
        let hash = Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        Self {
            states: mdp.len(),
            checksum,
            hash,
        }
    }
}

pub fn unix_time() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Renders a float for tables; non-finite values use `inf`/`nan`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v}")
    }
}
