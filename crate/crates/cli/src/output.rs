use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::ExperimentConfig;

pub const CONFIG_ECHO: &str = "config.toml";
pub const MANIFEST: &str = "manifest.toml";

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_hash: &'a str,
    seed: u64,
    method: &'a str,
    files: &'a [String],
    summary: toml::Table,
}

/// Output directory of one command: resolved config echo, CSV files tagged
/// with the config hash, and a manifest.
pub struct RunOutput {
    dir: PathBuf,
    command: &'static str,
    hash: String,
    seed: u64,
    method: &'static str,
    files: Vec<String>,
}

impl RunOutput {
    pub fn create(config: &ExperimentConfig, command: &'static str) -> Result<Self> {
        let dir = config.out_dir();
        fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
        fs::write(dir.join(CONFIG_ECHO), config.to_toml()?)?;
        Ok(Self {
            dir,
            command,
            hash: config.hash()?,
            seed: config.seed(),
            method: config.method().cli_name(),
            files: vec![CONFIG_ECHO.to_string()],
        })
    }

    /// Writes `name` with the given header; a `config_hash` column is appended
    /// to every row.
    pub fn csv<I, R>(&mut self, name: &str, header: &[String], rows: I) -> Result<PathBuf>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path)
            .with_context(|| format!("cannot write {}", path.display()))?;
        w.write_record(header.iter().map(String::as_str).chain(["config_hash"]))?;
        for row in rows {
            let mut record: Vec<String> = row.into_iter().collect();
            record.push(self.hash.clone());
            w.write_record(&record)?;
        }
        w.flush()?;
        self.files.push(name.to_string());
        Ok(path)
    }

    pub fn finish(self, summary: toml::Table) -> Result<PathBuf> {
        let mut files = self.files;
        files.push(MANIFEST.to_string());
        let manifest = Manifest {
            command: self.command,
            config_hash: &self.hash,
            seed: self.seed,
            method: self.method,
            files: &files,
            summary,
        };
        let path = self.dir.join(MANIFEST);
        fs::write(&path, toml::to_string(&manifest)?)?;
        Ok(path)
    }
}

pub fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Shortest round-trip text of a float; NaN for missing values.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, num)
}
