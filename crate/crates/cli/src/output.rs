//! CSV/JSON writers and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::CliError;

/// 17 significant digits; round-trips every `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Accumulates a CSV document with a fixed header.
pub struct Csv {
    body: String,
    width: usize,
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let cols: Vec<&str> = header.iter().map(AsRef::as_ref).collect();
        Self {
            body: format!("{}\n", cols.join(",")),
            width: cols.len(),
        }
    }

    pub fn row<S: AsRef<str>>(&mut self, cells: &[S]) {
        debug_assert_eq!(cells.len(), self.width);
        let cols: Vec<&str> = cells.iter().map(AsRef::as_ref).collect();
        let _ = writeln!(self.body, "{}", cols.join(","));
    }

    pub fn float_row(&mut self, values: &[f64]) {
        let cells: Vec<String> = values.iter().map(|&v| fmt_f64(v)).collect();
        self.row(&cells);
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        write_file(path, &self.body)
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    write_file(path, &text)
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// How the files of one output directory were produced.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub master_seed: Option<u64>,
    pub output_directory: PathBuf,
    pub tool_version: String,
    pub started_unix_seconds: f64,
    pub wall_clock_seconds: f64,
}

pub struct Clock {
    started: SystemTime,
}

impl Clock {
    pub fn start() -> Self {
        Self {
            started: SystemTime::now(),
        }
    }

    pub fn manifest<C: Serialize>(
        &self,
        command: &str,
        config: &C,
        master_seed: Option<u64>,
        out_dir: &Path,
    ) -> Result<RunManifest, CliError> {
        let since = |t: SystemTime| t.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
        Ok(RunManifest {
            command: command.to_string(),
            config: serde_json::to_value(config).map_err(|e| CliError::Internal(e.to_string()))?,
            master_seed,
            output_directory: out_dir.to_path_buf(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix_seconds: since(self.started),
            wall_clock_seconds: self.started.elapsed().map(|d| d.as_secs_f64()).unwrap_or(0.0),
        })
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 42.666666666666664, -1e-300, 12.597_224_362_623_38] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn header_only_csv() {
        let c = Csv::new(&["x", "density"]);
        assert_eq!(c.body, "x,density\n");
    }
}
