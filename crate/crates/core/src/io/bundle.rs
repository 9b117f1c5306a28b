//! Plot bundles: numeric tables plus a JSON manifest describing each table.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ensembles::RandomSeed;
use crate::error::{Error, Result};

use super::config::AnalysisConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Estimated from (synthetic or ingested) data.
    ExperimentalEstimate,
    Theory,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# {}\n", self.columns.join(","));
        for r in &self.rows {
            let fields: Vec<String> = r.iter().map(|v| format!("{v}")).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableManifest {
    pub name: String,
    pub file: String,
    pub columns: Vec<String>,
    pub rows: usize,
    pub provenance: Provenance,
    /// Library operation that produced the numbers.
    pub operation: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub subcommand: String,
    pub seed: RandomSeed,
    pub config: AnalysisConfig,
    pub tables: Vec<TableManifest>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotBundle {
    pub subcommand: String,
    pub seed: RandomSeed,
    pub config: AnalysisConfig,
    pub tables: Vec<(TableManifest, Table)>,
}

impl PlotBundle {
    pub fn new(subcommand: &str, config: &AnalysisConfig) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            seed: RandomSeed::new(config.seed, 0),
            config: config.clone(),
            tables: Vec::new(),
        }
    }

    pub fn add(&mut self, table: Table, provenance: Provenance, operation: &str, description: &str) {
        let manifest = TableManifest {
            name: table.name.clone(),
            file: format!("{}.csv", table.name),
            columns: table.columns.clone(),
            rows: table.rows.len(),
            provenance,
            operation: operation.to_string(),
            description: description.to_string(),
        };
        self.tables.push((manifest, table));
    }

    /// Moves every table of `other` into `self` with names prefixed by `prefix`.
    pub fn absorb(&mut self, prefix: &str, other: PlotBundle) {
        for (mut m, mut t) in other.tables {
            t.name = format!("{prefix}{}", t.name);
            m.name = t.name.clone();
            m.file = format!("{}.csv", t.name);
            self.tables.push((m, t));
        }
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|(_, t)| t.name == name).map(|(_, t)| t)
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            subcommand: self.subcommand.clone(),
            seed: self.seed,
            config: self.config.clone(),
            tables: self.tables.iter().map(|(m, _)| m.clone()).collect(),
        }
    }

    /// Writes `<name>.csv` per table and `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut names = std::collections::BTreeSet::new();
        for (m, t) in &self.tables {
            if m.name != t.name || !names.insert(t.name.clone()) {
                return Err(Error::Data(format!("table name `{}` is duplicated or mismatched", t.name)));
            }
        }
        std::fs::create_dir_all(dir)?;
        for (m, t) in &self.tables {
            write_atomic(&dir.join(&m.file), t.to_csv().as_bytes())?;
        }
        let json = serde_json::to_string_pretty(&self.manifest())
            .map_err(|e| Error::Data(format!("manifest serialization: {e}")))?;
        write_atomic(&dir.join("manifest.json"), format!("{json}\n").as_bytes())
    }
}

/// Writes to a sibling temporary file, syncs it and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Data(format!("`{}` has no file name", path.display())))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trips_floats() {
        let mut t = Table::new("x", &["a", "b"]);
        t.push(vec![0.1 + 0.2, 1e-300]);
        t.push(vec![-2.5e17, std::f64::consts::PI]);
        let csv = t.to_csv();
        let back: Vec<Vec<f64>> = csv
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
            .collect();
        assert_eq!(back, t.rows);
    }

    #[test]
    fn write_creates_manifest() {
        let d = tempfile::tempdir().unwrap();
        let cfg = AnalysisConfig::default();
        let mut b = PlotBundle::new("eef-theory", &cfg);
        b.add(Table::new("curve", &["x", "y"]), Provenance::Theory, "op", "desc");
        b.write(d.path()).unwrap();
        assert!(d.path().join("curve.csv").exists());
        let m: Manifest = serde_json::from_str(&std::fs::read_to_string(d.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m.tables[0].name, "curve");
        let leftovers: Vec<_> = std::fs::read_dir(d.path())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".tmp"))
            .collect();
        assert!(leftovers.is_empty());
    }
}
