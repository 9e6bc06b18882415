//! Plain-text tables, square matrix files and binary PGM renders.
//!
//! Text files start with a `# hsp <kind> v1` line followed by `# key = value`
//! metadata lines. Tables then carry one tab-separated header row and data rows;
//! matrix files carry `n_bins` rows of `n_bins` whitespace-separated values.
//! Floats are written in Rust's shortest round-trip form, so reading back is exact.
//! Missing table values are written as `-`.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{HspError, Result};
use crate::forward::JointDistribution;
use crate::sampler::{CoincidenceCounts, DetectorConfig, MarginalCounts, MeasurementMode};
use crate::wavefunction::{Grid, Wavefunction};

const MISSING: &str = "-";

/// Header shared by tables and matrix files.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Header {
    pub kind: String,
    pub meta: BTreeMap<String, String>,
}

impl Header {
    pub fn new(kind: &str) -> Self {
        Self {
            kind: kind.to_string(),
            meta: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    pub fn with_grid(self, grid: &Grid) -> Self {
        self.with("x_min", grid.x_min())
            .with("x_max", grid.x_max())
            .with("n_bins", grid.n_bins())
    }

    pub fn with_detector(self, det: &DetectorConfig) -> Self {
        self.with("dark_rate", det.dark_rate)
            .with("n_frames", det.n_frames)
            .with("pair_efficiency", det.pair_efficiency)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .meta
            .get(key)
            .ok_or_else(|| HspError::Format(format!("{} file lacks `{key}`", self.kind)))?;
        raw.parse().map_err(|_| {
            HspError::Format(format!("{} file: cannot parse `{key} = {raw}`", self.kind))
        })
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.get("x_min")?, self.get("x_max")?, self.get("n_bins")?)
    }

    fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind != kind {
            return Err(HspError::Format(format!(
                "expected a {kind} file, found {}",
                self.kind
            )));
        }
        Ok(())
    }

    fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "# hsp {} v1", self.kind)?;
        for (k, v) in &self.meta {
            writeln!(w, "# {k} = {v}")?;
        }
        Ok(())
    }
}

/// Reads the header and returns the remaining non-empty lines.
fn read_header<R: BufRead>(r: R) -> Result<(Header, Vec<String>)> {
    let mut lines = r.lines();
    let first = lines
        .next()
        .transpose()?
        .ok_or_else(|| HspError::Format("empty file".into()))?;
    let kind = first
        .strip_prefix("# hsp ")
        .and_then(|rest| rest.strip_suffix(" v1"))
        .ok_or_else(|| HspError::Format(format!("unrecognized first line `{first}`")))?;
    let mut header = Header::new(kind);
    let mut body = Vec::new();
    for line in lines {
        let line = line?;
        if let Some(meta) = line.strip_prefix('#') {
            if !body.is_empty() {
                return Err(HspError::Format("metadata after data".into()));
            }
            let (k, v) = meta
                .split_once('=')
                .ok_or_else(|| HspError::Format(format!("bad metadata line `{line}`")))?;
            header
                .meta
                .insert(k.trim().to_string(), v.trim().to_string());
        } else if !line.trim().is_empty() {
            body.push(line);
        }
    }
    Ok((header, body))
}

/// Column-oriented table of optional floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Header,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn new(header: Header, columns: &[&str]) -> Self {
        Self {
            header,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Option<f64>>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let c = self.columns.iter().position(|n| n == name).ok_or_else(|| {
            HspError::Format(format!("{} table lacks column `{name}`", self.header.kind))
        })?;
        Ok(self.rows.iter().map(|r| r[c]).collect())
    }

    /// Column with every value present.
    pub fn full_column(&self, name: &str) -> Result<Vec<f64>> {
        self.column(name)?
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| HspError::Format(format!("missing `{name}` in row {i}"))))
            .collect()
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        self.header.write(w)?;
        writeln!(w, "{}", self.columns.join("\t"))?;
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|v| v.map_or_else(|| MISSING.to_string(), |x| x.to_string()))
                .collect();
            writeln!(w, "{}", cells.join("\t"))?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let (header, body) = read_header(r)?;
        let mut lines = body.into_iter();
        let columns: Vec<String> = lines
            .next()
            .ok_or_else(|| HspError::Format("table has no column header".into()))?
            .split('\t')
            .map(|s| s.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split('\t').collect();
            if cells.len() != columns.len() {
                return Err(HspError::Format(format!(
                    "row {i}: {} cells for {} columns",
                    cells.len(),
                    columns.len()
                )));
            }
            let row = cells
                .iter()
                .map(|c| {
                    let c = c.trim();
                    if c == MISSING {
                        Ok(None)
                    } else {
                        c.parse::<f64>()
                            .map(Some)
                            .map_err(|_| HspError::Format(format!("row {i}: bad number `{c}`")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(Self {
            header,
            columns,
            rows,
        })
    }
}

fn check_rows(t: &Table, grid: &Grid) -> Result<()> {
    if t.rows.len() != grid.n_bins() {
        return Err(HspError::Format(format!(
            "{} table has {} rows for {} bins",
            t.header.kind,
            t.rows.len(),
            grid.n_bins()
        )));
    }
    Ok(())
}

fn as_count(v: f64, what: &str) -> Result<u64> {
    if v >= 0.0 && v.fract() == 0.0 && v < 2f64.powi(53) {
        Ok(v as u64)
    } else {
        Err(HspError::Format(format!("{what}: `{v}` is not a count")))
    }
}

pub fn wavefunction_table(wf: &Wavefunction) -> Table {
    let mut t = Table::new(
        Header::new("wavefunction").with_grid(wf.grid()),
        &["x", "amplitude", "phase"],
    );
    for (i, x) in wf.grid().centers().into_iter().enumerate() {
        t.push(vec![Some(x), Some(wf.amplitude()[i]), Some(wf.phase()[i])]);
    }
    t
}

pub fn wavefunction_from_table(t: &Table) -> Result<Wavefunction> {
    t.header.expect_kind("wavefunction")?;
    let grid = t.header.grid()?;
    check_rows(t, &grid)?;
    Wavefunction::new(grid, t.full_column("amplitude")?, t.full_column("phase")?)
}

pub fn marginal_table(m: &MarginalCounts) -> Table {
    let header = Header::new("marginal")
        .with_grid(&m.grid)
        .with("mode", m.mode.as_str())
        .with("n_events", m.n_events)
        .with("seed", m.seed);
    let mut t = Table::new(header, &["x", "counts"]);
    for (x, c) in m.grid.centers().into_iter().zip(&m.counts) {
        t.push(vec![Some(x), Some(*c as f64)]);
    }
    t
}

pub fn marginal_from_table(t: &Table) -> Result<MarginalCounts> {
    t.header.expect_kind("marginal")?;
    let grid = t.header.grid()?;
    check_rows(t, &grid)?;
    let mode: MeasurementMode = t.header.get::<String>("mode")?.parse()?;
    let counts = t
        .full_column("counts")?
        .into_iter()
        .map(|v| as_count(v, "counts"))
        .collect::<Result<Vec<_>>>()?;
    let m = MarginalCounts::new(grid, counts, mode, t.header.get("seed")?)?;
    let declared: u64 = t.header.get("n_events")?;
    if declared != m.n_events {
        return Err(HspError::Format(format!(
            "marginal file declares {declared} events but holds {}",
            m.n_events
        )));
    }
    Ok(m)
}

/// Square matrix on a grid, row index `i` along `x`, column `j` along `x'`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFile {
    pub header: Header,
    pub values: Vec<f64>,
}

impl MatrixFile {
    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        let n: usize = self.header.get("n_bins")?;
        self.header.write(w)?;
        for row in self.values.chunks(n) {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", cells.join(" "))?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let (header, body) = read_header(r)?;
        let n = header.grid()?.n_bins();
        if body.len() != n {
            return Err(HspError::Format(format!(
                "{} matrix has {} rows, expected {n}",
                header.kind,
                body.len()
            )));
        }
        let mut values = Vec::with_capacity(n * n);
        for (i, line) in body.iter().enumerate() {
            let before = values.len();
            for cell in line.split_whitespace() {
                values.push(
                    cell.parse::<f64>()
                        .map_err(|_| HspError::Format(format!("row {i}: bad number `{cell}`")))?,
                );
            }
            if values.len() - before != n {
                return Err(HspError::Format(format!(
                    "row {i} has {} values, expected {n}",
                    values.len() - before
                )));
            }
        }
        Ok(Self { header, values })
    }
}

pub fn counts_matrix(c: &CoincidenceCounts) -> MatrixFile {
    MatrixFile {
        header: Header::new("coincidences")
            .with_grid(&c.grid)
            .with("mode", MeasurementMode::Hologram.as_str())
            .with("n_pairs", c.n_pairs)
            .with("seed", c.seed),
        values: c.counts.iter().map(|&v| v as f64).collect(),
    }
}

pub fn counts_from_matrix(m: &MatrixFile) -> Result<CoincidenceCounts> {
    m.header.expect_kind("coincidences")?;
    let grid = m.header.grid()?;
    let counts = m
        .values
        .iter()
        .map(|&v| as_count(v, "coincidences"))
        .collect::<Result<Vec<_>>>()?;
    let c = CoincidenceCounts::new(grid, counts, m.header.get("seed")?)?;
    let declared: u64 = m.header.get("n_pairs")?;
    if declared != c.n_pairs {
        return Err(HspError::Format(format!(
            "coincidence file declares {declared} pairs but holds {}",
            c.n_pairs
        )));
    }
    Ok(c)
}

pub fn distribution_matrix(jd: &JointDistribution) -> MatrixFile {
    let mut header = Header::new("distribution").with_grid(jd.grid());
    if let Some(v) = jd.visibility() {
        header = header.with("visibility", v);
    }
    MatrixFile {
        header,
        values: jd.values().to_vec(),
    }
}

pub fn distribution_from_matrix(m: &MatrixFile) -> Result<JointDistribution> {
    m.header.expect_kind("distribution")?;
    let visibility = match m.header.meta.get("visibility") {
        Some(_) => Some(m.header.get("visibility")?),
        None => None,
    };
    JointDistribution::new(m.header.grid()?, m.values.clone(), visibility)
}

/// Scaling recorded next to a PGM render.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgmScale {
    pub width: usize,
    pub height: usize,
    /// Value mapped to gray level 0.
    pub black: f64,
    /// Value mapped to gray level 255.
    pub white: f64,
    pub description: String,
}

impl PgmScale {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plain struct serializes");
        s.push('\n');
        s
    }
}

/// Binary 8-bit PGM, linear from 0 to the largest value; negative values clip to black.
pub fn write_pgm<W: Write>(
    w: &mut W,
    values: &[f64],
    width: usize,
    height: usize,
    description: &str,
) -> Result<PgmScale> {
    if values.len() != width * height {
        return Err(HspError::LengthMismatch {
            name: "values",
            expected: width * height,
            actual: values.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(HspError::invalid("values", "render input must be finite"));
    }
    let white = values.iter().cloned().fold(0.0, f64::max);
    write!(w, "P5\n{width} {height}\n255\n")?;
    let pixels: Vec<u8> = values
        .iter()
        .map(|&v| {
            if white > 0.0 {
                (v.max(0.0) / white * 255.0).round() as u8
            } else {
                0
            }
        })
        .collect();
    w.write_all(&pixels)?;
    Ok(PgmScale {
        width,
        height,
        black: 0.0,
        white,
        description: description.to_string(),
    })
}
