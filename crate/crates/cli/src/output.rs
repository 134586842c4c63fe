//! CSV tables, JSON sidecars and all-or-nothing result writes.

use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde_json::Value;

/// Shortest round-trip form, with an exponent for very small or large values.
pub fn real(x: f64) -> String {
    format!("{x:?}")
}

pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        Ok(w.into_inner().map_err(|e| e.into_error())?)
    }
}

/// Files staged in memory and written together once a command succeeds.
pub struct Outputs {
    dir: Option<PathBuf>,
    staged: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Outputs { dir, staged: Vec::new() }
    }

    pub fn csv(&mut self, name: &str, t: &Table) -> Result<()> {
        self.staged.push((format!("{name}.csv"), t.to_csv()?));
        Ok(())
    }

    pub fn json(&mut self, name: &str, v: &Value) -> Result<()> {
        let mut s = serde_json::to_vec_pretty(v)?;
        s.push(b'\n');
        self.staged.push((format!("{name}.json"), s));
        Ok(())
    }

    /// Temp file plus rename for each file.
    pub fn commit(self) -> Result<Vec<PathBuf>> {
        let Some(dir) = self.dir else { return Ok(Vec::new()) };
        std::fs::create_dir_all(&dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        let mut pending = Vec::new();
        for (name, bytes) in self.staged {
            let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
            tmp.write_all(&bytes)?;
            pending.push((tmp, dir.join(name)));
        }
        let mut written = Vec::new();
        for (tmp, path) in pending {
            tmp.persist(&path).with_context(|| format!("writing {}", path.display()))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Canonical (sorted-key) JSON value.
pub fn to_json<T: serde::Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}
