//! Output bundles: every file is rendered in memory and only written once
//! the whole command has succeeded.

use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::config::Format;
use crate::error::{CliError, CliResult};

pub const SCHEMA: u64 = 1;

/// CSV cell for a float: shortest round-trip form, `NaN` for undefined values.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

#[derive(Debug, Default)]
pub struct Bundle {
    json: bool,
    csv: bool,
    files: Vec<(String, Vec<u8>)>,
}

impl Bundle {
    pub fn new(formats: &[Format]) -> Self {
        Self {
            json: formats.contains(&Format::Json),
            csv: formats.contains(&Format::Csv),
            files: Vec::new(),
        }
    }

    pub fn add_json(&mut self, name: &str, value: &Value) -> CliResult<()> {
        if self.json {
            let mut text = serde_json::to_string_pretty(value)
                .map_err(|e| CliError::numerical(format!("cannot encode {name}: {e}")))?;
            text.push('\n');
            self.files.push((name.to_string(), text.into_bytes()));
        }
        Ok(())
    }

    pub fn add_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
        if self.csv {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
            let fail = |e: csv::Error| CliError::numerical(format!("cannot encode {name}: {e}"));
            w.write_record(header).map_err(fail)?;
            for r in rows {
                w.write_record(r).map_err(fail)?;
            }
            let bytes = w
                .into_inner()
                .map_err(|e| CliError::numerical(format!("cannot encode {name}: {e}")))?;
            self.files.push((name.to_string(), bytes));
        }
        Ok(())
    }

    pub fn names(&self) -> Vec<&str> {
        self.files.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn contents(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }

    /// Writes every file into `dir`. On failure the files written so far are
    /// removed again.
    pub fn write(&self, dir: &Path) -> CliResult<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))?;
        let mut written = Vec::new();
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            if let Err(e) = std::fs::write(&path, bytes) {
                for p in written.iter().chain(std::iter::once(&path)) {
                    let _ = std::fs::remove_file(p);
                }
                return Err(CliError::config(format!("cannot write {}: {e}", path.display())));
            }
            written.push(path);
        }
        Ok(written)
    }
}
