//! Plot-ready tables and the file collector.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Floats are written with 17 significant digits so that a rerun can be
/// compared byte for byte.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Float(Vec<f64>),
    Int(Vec<i64>),
    Bool(Vec<bool>),
}

impl Column {
    fn len(&self) -> usize {
        match self {
            Column::Float(v) => v.len(),
            Column::Int(v) => v.len(),
            Column::Bool(v) => v.len(),
        }
    }

    fn cell(&self, i: usize) -> String {
        match self {
            Column::Float(v) => format_f64(v[i]),
            Column::Int(v) => v[i].to_string(),
            Column::Bool(v) => v[i].to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    names: Vec<String>,
    columns: Vec<Column>,
}

impl Table {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn float(mut self, name: impl Into<String>, v: Vec<f64>) -> Self {
        self.push(name.into(), Column::Float(v));
        self
    }

    pub fn int(mut self, name: impl Into<String>, v: Vec<i64>) -> Self {
        self.push(name.into(), Column::Int(v));
        self
    }

    pub fn bool(mut self, name: impl Into<String>, v: Vec<bool>) -> Self {
        self.push(name.into(), Column::Bool(v));
        self
    }

    fn push(&mut self, name: String, c: Column) {
        if let Some(first) = self.columns.first() {
            assert_eq!(first.len(), c.len(), "column {name} has the wrong length");
        }
        self.names.push(name);
        self.columns.push(c);
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Column::len)
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.names.join(",");
        s.push('\n');
        for i in 0..self.rows() {
            let row: Vec<String> = self.columns.iter().map(|c| c.cell(i)).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

/// One file produced by a run.
#[derive(Debug, Clone)]
pub enum Artifact {
    Csv { name: String, table: Table },
    Json { name: String, value: serde_json::Value },
}

impl Artifact {
    pub fn csv(name: impl Into<String>, table: Table) -> Self {
        Artifact::Csv { name: name.into(), table }
    }

    pub fn json(name: impl Into<String>, value: &impl Serialize) -> Self {
        Artifact::Json { name: name.into(), value: serde_json::to_value(value).expect("serializable output") }
    }

    pub fn name(&self) -> &str {
        match self {
            Artifact::Csv { name, .. } | Artifact::Json { name, .. } => name,
        }
    }

    fn render(&self) -> String {
        match self {
            Artifact::Csv { table, .. } => table.to_csv(),
            Artifact::Json { value, .. } => {
                let mut s = serde_json::to_string_pretty(value).expect("json renders");
                s.push('\n');
                s
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<OutputFile, CliError> {
    let path: PathBuf = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
    Ok(OutputFile { path: name.to_string(), sha256: hex::encode(Sha256::digest(contents.as_bytes())) })
}

pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<OutputFile>, CliError> {
    artifacts.iter().map(|a| write_file(dir, a.name(), &a.render())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, std::f64::consts::PI] {
            assert_eq!(format_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn csv_layout() {
        let t = Table::new().float("t", vec![0.0, 0.5]).int("n", vec![1, 2]).bool("ok", vec![true, false]);
        assert_eq!(t.to_csv(), "t,n,ok\n0.0000000000000000e0,1,true\n5.0000000000000000e-1,2,false\n");
    }

    #[test]
    #[should_panic]
    fn ragged_columns_are_a_bug() {
        let _ = Table::new().float("a", vec![1.0]).float("b", vec![]);
    }
}
