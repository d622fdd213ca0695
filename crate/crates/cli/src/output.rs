//! CSV and report artifacts. Numbers are written with 17 significant digits
//! so runs can be diffed byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{format_number, Config, Value};
use crate::error::{CliError, Result};

/// In-memory CSV table; a `None` cell is written empty.
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self {
            text: format!("{}\n", header.join(",")),
            columns: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[Option<f64>]) {
        debug_assert_eq!(cells.len(), self.columns);
        let parts: Vec<String> = cells.iter().map(|c| c.map(format_number).unwrap_or_default()).collect();
        let _ = writeln!(self.text, "{}", parts.join(","));
    }

    /// Row with preformatted cells (for text columns).
    pub fn raw_row(&mut self, cells: &[String]) {
        debug_assert_eq!(cells.len(), self.columns);
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

/// Key/value report under one prefix, written in the scenario grammar.
pub struct Report {
    prefix: String,
    config: Config,
}

impl Report {
    pub fn new(prefix: &str) -> Self {
        Self {
            prefix: prefix.to_string(),
            config: Config::new(),
        }
    }

    fn key(&self, k: &str) -> String {
        format!("{}.{k}", self.prefix)
    }

    pub fn num(&mut self, k: &str, x: f64) -> &mut Self {
        let key = self.key(k);
        self.config.set(&key, Value::Number(x));
        self
    }

    pub fn count(&mut self, k: &str, n: usize) -> &mut Self {
        self.num(k, n as f64)
    }

    pub fn text(&mut self, k: &str, s: &str) -> &mut Self {
        let key = self.key(k);
        self.config.set(&key, Value::text(s));
        self
    }

    pub fn flag(&mut self, k: &str, b: bool) -> &mut Self {
        let key = self.key(k);
        self.config.set(&key, Value::flag(b));
        self
    }

    pub fn list(&mut self, k: &str, xs: Vec<f64>) -> &mut Self {
        let key = self.key(k);
        self.config.set(&key, Value::list(xs));
        self
    }

    pub fn to_text(&self) -> String {
        self.config.to_text()
    }
}

/// Output directory; created on first write.
pub struct Artifacts {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(dir: impl AsRef<Path>) -> Self {
        Self {
            dir: dir.as_ref().to_path_buf(),
            written: Vec::new(),
        }
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir).map_err(|e| CliError::io(&self.dir, e))?;
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn csv(&mut self, name: &str, csv: &Csv) -> Result<PathBuf> {
        self.write(name, csv.as_str())
    }

    pub fn report(&mut self, name: &str, report: &Report) -> Result<PathBuf> {
        self.write(name, &report.to_text())
    }

    pub fn into_paths(self) -> Vec<PathBuf> {
        self.written
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_cells_stay_empty() {
        let mut csv = Csv::new(&["t", "psi"]);
        csv.row(&[Some(0.5), None]);
        assert_eq!(csv.as_str(), "t,psi\n5.0000000000000000e-1,\n");
    }

    #[test]
    fn reports_parse_as_configs() {
        let mut r = Report::new("threshold");
        r.num("lambda", 0.25).text("classification", "persistent").flag("discontinuous_dilution", false);
        let back = Config::parse(&r.to_text(), "report").unwrap();
        assert_eq!(back.get("threshold.lambda"), Some(&Value::Number(0.25)));
        assert_eq!(back.get("threshold.classification"), Some(&Value::text("persistent")));
    }
}
