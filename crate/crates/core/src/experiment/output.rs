use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::RunConfig;
use crate::error::Result;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// A plain table written as CSV.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

pub fn fmt_f(v: f64) -> String {
    format!("{v}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f).unwrap_or_default()
}

#[derive(Serialize)]
struct Manifest<'a, M: Serialize> {
    artifact: &'static str,
    version: &'static str,
    run_id: String,
    config: &'a RunConfig,
    metadata: &'a M,
}

/// Writes `<out>/<run-id>/{config.json, marginal.csv, binned.csv, curves.csv}`.
/// Each CSV starts with a `#` line carrying the version and resolved config.
pub fn write_run<M: Serialize>(
    cfg: &RunConfig,
    metadata: &M,
    marginal: &Table,
    binned: &Table,
    curves: &Table,
) -> Result<PathBuf> {
    let dir = cfg.out.join(cfg.run_id());
    fs::create_dir_all(&dir)?;
    let manifest = Manifest {
        artifact: "cpi-core",
        version: VERSION,
        run_id: cfg.run_id(),
        config: cfg,
        metadata,
    };
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    fs::write(dir.join("config.json"), json)?;
    let provenance = format!("# cpi-core {VERSION} config={}", serde_json::to_string(cfg)?);
    for (name, table) in [("marginal.csv", marginal), ("binned.csv", binned), ("curves.csv", curves)] {
        write_table(&dir.join(name), &provenance, table)?;
    }
    Ok(dir)
}

fn write_table(path: &Path, provenance: &str, table: &Table) -> Result<()> {
    let mut file = fs::File::create(path)?;
    writeln!(file, "{provenance}")?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}
