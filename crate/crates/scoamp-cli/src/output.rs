//! Tables with a `#` metadata block, JSON summaries, and their placement.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Plot-ready rows under a single header line.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Writes the metadata lines, then the CSV body.
    pub fn write<W: Write>(&self, meta: &Meta, out: W) -> Result<()> {
        let mut out = out;
        meta.write(&mut out)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest representation that reads back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

/// Run identification written ahead of every table.
#[derive(Debug, Clone, PartialEq)]
pub struct Meta {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
}

impl Meta {
    fn write<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "# scoamp {} {}", self.command, env!("CARGO_PKG_VERSION"))?;
        writeln!(out, "# config_sha256: {}", self.config_sha256)?;
        writeln!(out, "# seed: {}", self.seed)?;
        Ok(())
    }
}

/// Output of one command.
#[derive(Debug, Clone)]
pub struct Report {
    pub table: Table,
    /// Pretty-printed JSON.
    pub summary: String,
}

impl Report {
    pub fn new<S: Serialize>(table: Table, summary: &S) -> Result<Self> {
        Ok(Report { table, summary: serde_json::to_string_pretty(summary)? + "\n" })
    }

    /// Writes the table to `out` and the summary next to it with a `.json`
    /// extension. Without `out` the table goes to stdout and the summary to
    /// stderr.
    pub fn emit(&self, meta: &Meta, out: Option<&Path>) -> Result<()> {
        let summary = &self.summary;
        match out {
            Some(path) => {
                let file = std::fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
                self.table.write(meta, std::io::BufWriter::new(file))?;
                let json = summary_path(path);
                std::fs::write(&json, summary).with_context(|| format!("cannot write {}", json.display()))?;
            }
            None => {
                self.table.write(meta, std::io::stdout().lock())?;
                eprint!("{summary}");
            }
        }
        Ok(())
    }
}

/// `runs/x.csv` gives `runs/x.json`.
pub fn summary_path(out: &Path) -> PathBuf {
    if out.extension().is_some_and(|e| e == "json") {
        let mut name = out.as_os_str().to_owned();
        name.push(".summary.json");
        return PathBuf::from(name);
    }
    out.with_extension("json")
}

/// Seed of trial `trial` at sweep point `point`, independent of how trials
/// are scheduled.
pub fn trial_seed(master: u64, point: usize, trial: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update((point as u64).to_le_bytes());
    h.update((trial as u64).to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}
