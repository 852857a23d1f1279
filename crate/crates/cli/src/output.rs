//! Atomic output writing: JSON summaries and CSV series.
//!
//! Every file embeds the tool version, the full resolved configuration and
//! the master seed; files are written to a temporary sibling and renamed
//! into place.

use crate::config::StoredConfig;
use anyhow::Context;
use serde::Serialize;
use std::io::Write;
use std::path::Path;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Build the summary document `{version, seed, config, aggregates}`.
pub fn summary_json<T: Serialize>(config: &StoredConfig, aggregates: &T) -> serde_json::Value {
    serde_json::json!({
        "version": VERSION,
        "seed": config.seed,
        "config": config,
        "aggregates": aggregates,
    })
}

fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(d) => tempfile::NamedTempFile::new_in(d),
        None => tempfile::NamedTempFile::new_in("."),
    }
    .context("cannot create temporary file")?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path)
        .with_context(|| format!("cannot persist {}", path.display()))?;
    Ok(())
}

/// Serialise the summary (pretty, trailing newline) and write it atomically.
pub fn write_json(path: &Path, value: &serde_json::Value) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// CSV writer: a `# config` comment line embedding version/config/seed,
/// then a header row and comma-separated records with '.' decimals.
pub struct CsvSeries {
    lines: Vec<String>,
}

impl CsvSeries {
    pub fn new(config: &StoredConfig, header: &[&str]) -> Self {
        let meta = serde_json::json!({
            "version": VERSION,
            "seed": config.seed,
            "config": config,
        });
        CsvSeries {
            lines: vec![format!("# {}", meta), header.join(",")],
        }
    }

    pub fn push(&mut self, fields: &[CsvField]) {
        let row: Vec<String> = fields.iter().map(|f| f.render()).collect();
        self.lines.push(row.join(","));
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let mut text = self.lines.join("\n");
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }
}

/// One CSV cell.
pub enum CsvField {
    Int(i64),
    Float(f64),
    Text(String),
}

impl CsvField {
    fn render(&self) -> String {
        match self {
            CsvField::Int(v) => v.to_string(),
            CsvField::Float(v) => format!("{v}"),
            CsvField::Text(t) => t.clone(),
        }
    }
}
