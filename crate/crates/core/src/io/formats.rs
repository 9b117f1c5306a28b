//! Resonance lists and two-port S-parameter tables.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::ensembles::{LevelSequence, StatKind};
use crate::error::{Error, Result};
use crate::scattering::{SMatrix, SMatrixSeries};

use super::bundle::write_atomic;

/// Frequencies closer than this (GHz) within one realization are duplicates.
pub const DUPLICATE_TOL_GHZ: f64 = 1e-9;
/// Allowed deviation from a uniform frequency step, GHz.
pub const GRID_TOL_GHZ: f64 = 1e-9;
pub const MAGNITUDE_TOL: f64 = 1e-6;

pub const RESONANCE_HEADER: &str = "# realization_id,frequency_ghz,width_ghz";
pub const SPARAM_HEADER: &str =
    "# realization_id,frequency_ghz,saa_re,saa_im,sab_re,sab_im,sba_re,sba_im,sbb_re,sbb_im";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResonanceFormat {
    /// `realization_id,frequency_ghz[,width_ghz]` rows.
    Csv,
    /// One frequency per line, all in realization 0.
    FrequencyList,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceRow {
    pub realization_id: u64,
    pub frequency_ghz: f64,
    pub width_ghz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResonanceTable {
    pub rows: Vec<ResonanceRow>,
}

impl ResonanceTable {
    /// One row per level of each sequence, realization ids 0, 1, ...
    pub fn from_sequences(sequences: &[LevelSequence]) -> Self {
        let rows = sequences
            .iter()
            .enumerate()
            .flat_map(|(id, seq)| {
                seq.levels().iter().map(move |&f| ResonanceRow { realization_id: id as u64, frequency_ghz: f, width_ghz: None })
            })
            .collect();
        Self { rows }
    }

    /// Level sequences grouped by realization id, in ascending id order.
    pub fn realizations(&self) -> Result<Vec<(u64, LevelSequence)>> {
        let mut groups: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
        for r in &self.rows {
            groups.entry(r.realization_id).or_default().push(r.frequency_ghz);
        }
        groups
            .into_iter()
            .map(|(id, f)| Ok((id, LevelSequence::new(f, StatKind::Ingested)?)))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(RESONANCE_HEADER);
        out.push('\n');
        for r in &self.rows {
            match r.width_ghz {
                Some(w) => out.push_str(&format!("{},{},{}\n", r.realization_id, r.frequency_ghz, w)),
                None => out.push_str(&format!("{},{},\n", r.realization_id, r.frequency_ghz)),
            }
        }
        out
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, message: message.into() }
}

fn parse_f64(path: &Path, line: usize, field: &str, name: &str) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| parse_err(path, line, format!("{name}: `{field}` is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("{name} is not finite")));
    }
    Ok(v)
}

fn parse_id(path: &Path, line: usize, field: &str) -> Result<u64> {
    field
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("realization_id: `{field}` is not a non-negative integer")))
}

/// Data lines with 1-based line numbers; blank lines and `#` comments are skipped.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

fn read(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

/// Tracks the last frequency per realization and rejects decreasing or duplicate entries.
struct OrderCheck {
    path: PathBuf,
    last: BTreeMap<u64, (f64, usize)>,
}

impl OrderCheck {
    fn new(path: &Path) -> Self {
        Self { path: path.to_path_buf(), last: BTreeMap::new() }
    }

    fn check(&mut self, id: u64, f: f64, line: usize) -> Result<Option<f64>> {
        let prev = self.last.insert(id, (f, line));
        if let Some((p, pl)) = prev {
            if (f - p).abs() <= DUPLICATE_TOL_GHZ {
                return Err(Error::Ordering {
                    path: self.path.clone(),
                    line,
                    message: format!("duplicate frequency {f} GHz in realization {id} (line {pl})"),
                });
            }
            if f < p {
                return Err(Error::Ordering {
                    path: self.path.clone(),
                    line,
                    message: format!("frequency {f} GHz in realization {id} is below {p} GHz on line {pl}"),
                });
            }
            return Ok(Some(p));
        }
        Ok(None)
    }
}

pub fn ingest_resonances(path: &Path, format: ResonanceFormat) -> Result<ResonanceTable> {
    let text = read(path)?;
    let mut order = OrderCheck::new(path);
    let mut rows = Vec::new();
    for (line, l) in data_lines(&text) {
        let row = match format {
            ResonanceFormat::FrequencyList => {
                ResonanceRow { realization_id: 0, frequency_ghz: parse_f64(path, line, l, "frequency_ghz")?, width_ghz: None }
            }
            ResonanceFormat::Csv => {
                let fields: Vec<&str> = l.split(',').collect();
                if !(2..=3).contains(&fields.len()) {
                    return Err(parse_err(path, line, format!("expected 2 or 3 fields, found {}", fields.len())));
                }
                let width_ghz = match fields.get(2).map(|s| s.trim()) {
                    None | Some("") => None,
                    Some(w) => {
                        let w = parse_f64(path, line, w, "width_ghz")?;
                        if w < 0.0 {
                            return Err(parse_err(path, line, "width_ghz is negative"));
                        }
                        Some(w)
                    }
                };
                ResonanceRow {
                    realization_id: parse_id(path, line, fields[0])?,
                    frequency_ghz: parse_f64(path, line, fields[1], "frequency_ghz")?,
                    width_ghz,
                }
            }
        };
        order.check(row.realization_id, row.frequency_ghz, line)?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(path, 1, "no data rows"));
    }
    Ok(ResonanceTable { rows })
}

pub fn write_resonances(path: &Path, table: &ResonanceTable) -> Result<()> {
    write_atomic(path, table.to_csv().as_bytes())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SParamRow {
    pub realization_id: u64,
    pub frequency_ghz: f64,
    pub s: SMatrix,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SParamTable {
    pub rows: Vec<SParamRow>,
}

impl SParamTable {
    pub fn from_series(series: &[SMatrixSeries]) -> Self {
        let rows = series
            .iter()
            .flat_map(|s| {
                s.frequencies
                    .iter()
                    .zip(&s.s)
                    .map(move |(&f, m)| SParamRow { realization_id: s.realization_id, frequency_ghz: f, s: *m })
            })
            .collect();
        Self { rows }
    }

    /// Groups rows by realization id (ascending), keeping file order within each.
    pub fn to_series(&self) -> Vec<SMatrixSeries> {
        let mut groups: BTreeMap<u64, SMatrixSeries> = BTreeMap::new();
        for r in &self.rows {
            let e = groups.entry(r.realization_id).or_insert_with(|| SMatrixSeries {
                realization_id: r.realization_id,
                frequencies: Vec::new(),
                s: Vec::new(),
                pole_perturbations: 0,
            });
            e.frequencies.push(r.frequency_ghz);
            e.s.push(r.s);
        }
        groups.into_values().collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(SPARAM_HEADER);
        out.push('\n');
        for r in &self.rows {
            let s = &r.s;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.realization_id,
                r.frequency_ghz,
                s[0][0].re,
                s[0][0].im,
                s[0][1].re,
                s[0][1].im,
                s[1][0].re,
                s[1][0].im,
                s[1][1].re,
                s[1][1].im
            ));
        }
        out
    }
}

pub fn ingest_sparams(path: &Path) -> Result<SParamTable> {
    let text = read(path)?;
    let mut order = OrderCheck::new(path);
    let mut steps: BTreeMap<u64, f64> = BTreeMap::new();
    let mut rows = Vec::new();
    const NAMES: [&str; 8] = ["saa_re", "saa_im", "sab_re", "sab_im", "sba_re", "sba_im", "sbb_re", "sbb_im"];
    for (line, l) in data_lines(&text) {
        let fields: Vec<&str> = l.split(',').collect();
        if fields.len() != 10 {
            return Err(parse_err(path, line, format!("expected 10 fields, found {}", fields.len())));
        }
        let id = parse_id(path, line, fields[0])?;
        let f = parse_f64(path, line, fields[1], "frequency_ghz")?;
        let mut v = [0.0; 8];
        for (k, name) in NAMES.iter().enumerate() {
            v[k] = parse_f64(path, line, fields[2 + k], name)?;
        }
        let c = |k: usize| Complex64::new(v[2 * k], v[2 * k + 1]);
        let s = [[c(0), c(1)], [c(2), c(3)]];
        for (k, z) in [c(0), c(1), c(2), c(3)].iter().enumerate() {
            if z.norm() > 1.0 + MAGNITUDE_TOL {
                return Err(Error::Magnitude {
                    path: path.to_path_buf(),
                    line,
                    message: format!("|{}| = {} exceeds 1", ["S_aa", "S_ab", "S_ba", "S_bb"][k], z.norm()),
                });
            }
        }
        if let Some(prev) = order.check(id, f, line)? {
            let step = f - prev;
            match steps.get(&id) {
                None => {
                    steps.insert(id, step);
                }
                Some(&s0) if (step - s0).abs() > GRID_TOL_GHZ => {
                    return Err(Error::Grid {
                        path: path.to_path_buf(),
                        message: format!("line {line}: step {step} GHz differs from {s0} GHz in realization {id}"),
                    });
                }
                _ => {}
            }
        }
        rows.push(SParamRow { realization_id: id, frequency_ghz: f, s });
    }
    if rows.is_empty() {
        return Err(parse_err(path, 1, "no data rows"));
    }
    Ok(SParamTable { rows })
}

pub fn write_sparams(path: &Path, table: &SParamTable) -> Result<()> {
    write_atomic(path, table.to_csv().as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn three_rows() {
        let d = tempfile::tempdir().unwrap();
        let p = write(&d, "r.csv", "# realization_id,frequency_ghz,width_ghz\n0,8.1,0.001\n0,8.2,\n1,8.15,0.002\n");
        let t = ingest_resonances(&p, ResonanceFormat::Csv).unwrap();
        assert_eq!(t.rows.len(), 3);
        assert_eq!(t.rows[1].width_ghz, None);
    }

    #[test]
    fn ordering_violations_name_the_row() {
        let d = tempfile::tempdir().unwrap();
        let p = write(&d, "r.csv", "# h\n0,8.2\n0,8.1\n");
        match ingest_resonances(&p, ResonanceFormat::Csv) {
            Err(Error::Ordering { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let p = write(&d, "dup.csv", "# h\n0,8.2\n0,8.2000000000001\n");
        assert!(matches!(ingest_resonances(&p, ResonanceFormat::Csv), Err(Error::Ordering { line: 3, .. })));
        let p = write(&d, "bad.csv", "# h\n0,8.2\n0,abc\n");
        assert!(matches!(ingest_resonances(&p, ResonanceFormat::Csv), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn frequency_list() {
        let d = tempfile::tempdir().unwrap();
        let p = write(&d, "f.txt", "# frequencies\n1.5\n2.5\n\n3.5\n");
        let t = ingest_resonances(&p, ResonanceFormat::FrequencyList).unwrap();
        assert_eq!(t.rows.iter().map(|r| r.frequency_ghz).collect::<Vec<_>>(), vec![1.5, 2.5, 3.5]);
    }

    #[test]
    fn sparam_validation() {
        let d = tempfile::tempdir().unwrap();
        let p = write(&d, "s.csv", &format!("{SPARAM_HEADER}\n0,1.0,1.5,0,0,0,0,0,0,0\n"));
        assert!(matches!(ingest_sparams(&p), Err(Error::Magnitude { line: 2, .. })));
        let p = write(
            &d,
            "g.csv",
            &format!("{SPARAM_HEADER}\n0,1.0,0.5,0,0,0,0,0,0,0\n0,1.1,0.5,0,0,0,0,0,0,0\n0,1.25,0.5,0,0,0,0,0,0,0\n"),
        );
        assert!(matches!(ingest_sparams(&p), Err(Error::Grid { .. })));
    }
}
