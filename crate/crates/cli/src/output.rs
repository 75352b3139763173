//! Artifact writers. CSV files open with a schema comment line carrying the
//! seed and configuration hash; JSON files wrap their payload with the same.

use std::path::PathBuf;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;

pub const CSV_SCHEMA_VERSION: u32 = 1;

pub struct Output {
    dir: PathBuf,
    seed: u64,
    hash: String,
    written: Vec<String>,
}

impl Output {
    pub fn new(dir: PathBuf, cfg: &RunConfig) -> Result<Self, CliError> {
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir, seed: cfg.seed, hash: cfg.hash(), written: Vec::new() })
    }

    /// The schema comment line of a CSV artifact.
    pub fn csv_preamble(&self, schema: &str, meta: &[(&str, String)]) -> String {
        let mut line = format!(
            "# schema=percolab.{schema}.v{CSV_SCHEMA_VERSION} seed={} config_hash={}",
            self.seed, self.hash
        );
        for (k, v) in meta {
            line.push_str(&format!(" {k}={v}"));
        }
        line.push('\n');
        line
    }

    /// Write `preamble + columns + rows`; `rows` ends with a newline when nonempty.
    pub fn csv(&mut self, name: &str, schema: &str, columns: &str, rows: &str, meta: &[(&str, String)]) -> Result<(), CliError> {
        let mut body = self.csv_preamble(schema, meta);
        body.push_str(columns);
        body.push('\n');
        body.push_str(rows);
        self.write(name, &body)
    }

    /// Write a CSV whose column line is already part of `table`.
    pub fn csv_table(&mut self, name: &str, schema: &str, table: &str, meta: &[(&str, String)]) -> Result<(), CliError> {
        let body = self.csv_preamble(schema, meta) + table;
        self.write(name, &body)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, schema: &str, result: &T) -> Result<(), CliError> {
        let v = json!({
            "schema": format!("percolab.{schema}.v{CSV_SCHEMA_VERSION}"),
            "seed": self.seed,
            "config_hash": self.hash,
            "result": result,
        });
        self.write(name, &(serde_json::to_string_pretty(&v).expect("serializable") + "\n"))
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        self.write(name, body)
    }

    fn write(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        std::fs::write(self.dir.join(name), body)?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Write `manifest.json`: the configuration echo, seed, hash and artifact list.
    pub fn manifest(&mut self, subcommand: &str, cfg: &RunConfig, workers: usize, extra: Value) -> Result<PathBuf, CliError> {
        let v = json!({
            "schema": format!("percolab.manifest.v{CSV_SCHEMA_VERSION}"),
            "subcommand": subcommand,
            "seed": cfg.seed,
            "config_hash": self.hash,
            "config": cfg,
            "workers": workers,
            "artifacts": self.written,
            "summary": extra,
        });
        let path = self.dir.join(format!("{subcommand}.manifest.json"));
        std::fs::write(&path, serde_json::to_string_pretty(&v).expect("serializable") + "\n")?;
        Ok(path)
    }
}
