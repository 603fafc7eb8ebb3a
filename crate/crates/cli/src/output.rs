//! Artifact writing: CSV tables and JSON summaries carrying the config hash.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::config::{Format, ProblemConfig};
use crate::error::CliError;

/// Records every file it writes so a failed command can remove them.
pub struct Artifacts<'a> {
    dir: PathBuf,
    command: &'static str,
    cfg: &'a ProblemConfig,
    hash: String,
    written: Vec<PathBuf>,
}

/// Shortest round-trip form of a float, scientific for very small or
/// large magnitudes.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

impl<'a> Artifacts<'a> {
    pub fn new(command: &'static str, cfg: &'a ProblemConfig) -> Result<Self, CliError> {
        let dir = PathBuf::from(&cfg.output.directory);
        fs::create_dir_all(&dir)?;
        Ok(Artifacts { dir, command, cfg, hash: cfg.hash(), written: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        self.written.push(path.clone());
        fs::write(&path, bytes)?;
        Ok(())
    }

    /// Writes `name.csv` when CSV output is enabled.
    pub fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        if !self.cfg.writes(Format::Csv) {
            return Ok(());
        }
        let mut buf = format!("# annular-dirichlet {} config_sha256={}\n", self.command, self.hash).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(header).map_err(csv_error)?;
            for row in rows {
                w.write_record(row).map_err(csv_error)?;
            }
            w.flush()?;
        }
        self.write(&format!("{name}.csv"), &buf)
    }

    /// Writes `name.json` when JSON output is enabled.
    pub fn summary(&mut self, name: &str, fields: Map<String, Value>) -> Result<(), CliError> {
        if !self.cfg.writes(Format::Json) {
            return Ok(());
        }
        let mut doc = Map::new();
        doc.insert("command".into(), self.command.into());
        doc.insert("config_sha256".into(), self.hash.clone().into());
        doc.extend(fields);
        let text = serde_json::to_string_pretty(&Value::Object(doc)).expect("summary serializes") + "\n";
        self.write(&format!("{name}.json"), text.as_bytes())
    }

    /// Echo of the effective configuration.
    pub fn echo_config(&mut self) -> Result<(), CliError> {
        let doc = serde_json::json!({ "config_sha256": self.hash, "config": self.cfg });
        let text = serde_json::to_string_pretty(&doc).expect("config serializes") + "\n";
        self.write("config.json", text.as_bytes())
    }

    pub fn discard(self) {
        for path in &self.written {
            let _ = fs::remove_file(path);
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e))
}
