//! Collects an experiment's tables and results and writes them in one go.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use hawkes_impact::output::{write_atomic, Table};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::ExperimentConfig;
use crate::error::CliResult;

#[derive(Debug, Default)]
pub struct Report {
    files: Vec<(String, String)>,
    results: Map<String, Value>,
    checks: BTreeMap<String, bool>,
}

impl Report {
    pub fn table(&mut self, name: &str, table: &Table) -> CliResult<()> {
        self.files.push((name.to_string(), table.to_csv_string()?));
        Ok(())
    }

    pub fn result<T: Serialize>(&mut self, key: &str, value: T) -> CliResult<()> {
        self.results.insert(key.to_string(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn check(&mut self, name: &str, passed: bool) {
        self.checks.insert(name.to_string(), passed);
    }

    pub fn all_pass(&self) -> bool {
        self.checks.values().all(|&p| p)
    }

    pub fn checks(&self) -> &BTreeMap<String, bool> {
        &self.checks
    }

    pub fn summary(&self, config: &ExperimentConfig) -> Value {
        json!({
            "experiment": config.experiment,
            "seed": config.seed,
            "config": config,
            "results": self.results,
            "checks": self.checks,
            "all_checks_pass": self.all_pass(),
            "files": self.files.iter().map(|f| &f.0).collect::<Vec<_>>(),
        })
    }

    /// Writes every table, then `summary.json`, each by rename, so a present
    /// summary marks a complete run.
    pub fn write(&self, dir: &Path, config: &ExperimentConfig) -> CliResult<()> {
        fs::create_dir_all(dir)?;
        for (name, body) in &self.files {
            write_atomic(&dir.join(name), body.as_bytes())?;
        }
        let summary = serde_json::to_string_pretty(&self.summary(config))?;
        write_atomic(&dir.join("summary.json"), summary.as_bytes())?;
        Ok(())
    }
}
