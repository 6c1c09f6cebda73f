//! CSV ingestion and emission.
//!
//! Floats are written with 17 significant digits so every value re-parses to
//! the same `f64`. Lags are always written 1-based. Coefficient tables carry
//! the support in a leading `# omega=` comment line.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SarError};
use crate::mio::SparseFit;
use crate::models::{SeasonalityMap, StvSarResult, TvSarResult};
use crate::series::{GridSeries, TimeSeries};
use crate::support::Support;

/// Lossless decimal form of an `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_err(path: &Path, row: usize, message: impl Into<String>) -> SarError {
    SarError::Parse {
        path: path.to_path_buf(),
        row,
        message: message.into(),
    }
}

fn parse_finite(path: &Path, row: usize, field: &str) -> Result<f64> {
    let trimmed = field.trim();
    if trimmed.is_empty() {
        return Err(parse_err(path, row, "blank value"));
    }
    let v: f64 = trimmed
        .parse()
        .map_err(|_| parse_err(path, row, format!("'{trimmed}' is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(path, row, format!("non-finite value '{trimmed}'")));
    }
    Ok(v)
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?)
}

/// Reads one column of a CSV file as a series.
///
/// `column` is a header name or a 1-based column number; `None` picks the
/// last column. A first row whose selected field is not numeric is treated
/// as a header. Row numbers in errors are 1-based file lines.
pub fn read_univariate(path: impl AsRef<Path>, column: Option<&str>) -> Result<TimeSeries> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        records.push((line, rec));
    }
    let Some((first_line, first)) = records.first() else {
        return Err(SarError::EmptyFile { path: path.to_path_buf() });
    };
    let (index, skip_first) = match column {
        Some(sel) => match sel.parse::<usize>() {
            Ok(k) if k >= 1 => {
                let idx = k - 1;
                let head = first.get(idx).is_none_or(|f| f.parse::<f64>().is_err());
                (idx, head)
            }
            _ => {
                let idx = first
                    .iter()
                    .position(|f| f == sel)
                    .ok_or_else(|| parse_err(path, *first_line, format!("no column named '{sel}'")))?;
                (idx, true)
            }
        },
        None => {
            let idx = first.len().saturating_sub(1);
            let head = first.get(idx).is_none_or(|f| f.parse::<f64>().is_err());
            (idx, head)
        }
    };
    let mut values = Vec::with_capacity(records.len());
    for (line, rec) in records.iter().skip(usize::from(skip_first)) {
        let field = rec
            .get(index)
            .ok_or_else(|| parse_err(path, *line, format!("missing column {}", index + 1)))?;
        values.push(parse_finite(path, *line, field)?);
    }
    if values.is_empty() {
        return Err(SarError::EmptyFile { path: path.to_path_buf() });
    }
    TimeSeries::new(values)
}

pub fn write_univariate(path: impl AsRef<Path>, series: &TimeSeries) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "t,value")?;
    for (t, v) in series.values().iter().enumerate() {
        writeln!(out, "{},{}", t + 1, fmt_f64(*v))?;
    }
    out.flush()?;
    Ok(())
}

const GRID_HEADER: [&str; 5] = ["m", "n", "gamma", "t", "value"];

/// Reads a long-format grid `m,n,gamma,t,value` with 1-based indices.
///
/// Grid extents are the largest indices seen; `T_γ` is the largest `t` in
/// segment `γ`. Cells without rows are masked. Every present cell must cover
/// `t = 1..T_γ` exactly once.
pub fn read_grid(path: impl AsRef<Path>) -> Result<GridSeries> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let mut cells: BTreeMap<(usize, usize, usize), BTreeMap<usize, f64>> = BTreeMap::new();
    let mut header_seen = false;
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if !header_seen {
            if !rec.iter().eq(GRID_HEADER.iter().copied()) {
                return Err(parse_err(path, line, "expected header m,n,gamma,t,value"));
            }
            header_seen = true;
            continue;
        }
        if rec.len() != 5 {
            return Err(parse_err(path, line, format!("expected 5 fields, found {}", rec.len())));
        }
        let mut idx = [0usize; 4];
        for (slot, (name, field)) in idx.iter_mut().zip(GRID_HEADER.iter().zip(rec.iter())) {
            *slot = field
                .parse::<usize>()
                .ok()
                .filter(|&v| v >= 1)
                .ok_or_else(|| parse_err(path, line, format!("{name} must be a positive integer, got '{field}'")))?;
        }
        let value = parse_finite(path, line, &rec[4])?;
        let [m, n, g, t] = idx;
        if cells.entry((m, n, g)).or_default().insert(t, value).is_some() {
            return Err(parse_err(path, line, format!("duplicate key (m={m}, n={n}, gamma={g}, t={t})")));
        }
    }
    if cells.is_empty() {
        return Err(SarError::EmptyFile { path: path.to_path_buf() });
    }
    let rows = cells.keys().map(|k| k.0).max().unwrap();
    let cols = cells.keys().map(|k| k.1).max().unwrap();
    let segments = cells.keys().map(|k| k.2).max().unwrap();
    let mut lengths = vec![0usize; segments];
    for ((_, _, g), ts) in &cells {
        let last = *ts.keys().next_back().unwrap();
        lengths[g - 1] = lengths[g - 1].max(last);
    }
    if let Some(g) = lengths.iter().position(|&t| t == 0) {
        return Err(SarError::InvalidConfig(format!(
            "segment {} has no cells; segments must be numbered contiguously",
            g + 1
        )));
    }
    let mut grid = GridSeries::empty(rows, cols, lengths.clone())?;
    for ((m, n, g), ts) in cells {
        let expected = lengths[g - 1];
        if ts.len() != expected {
            return Err(SarError::RaggedCell {
                path: path.to_path_buf(),
                m,
                n,
                gamma: g,
                expected,
            });
        }
        grid.set_cell(m - 1, n - 1, g - 1, TimeSeries::new(ts.into_values().collect())?)?;
    }
    Ok(grid)
}

pub fn write_grid(path: impl AsRef<Path>, grid: &GridSeries) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{}", GRID_HEADER.join(","))?;
    let dims = grid.dims();
    for (idx, cell) in grid.cells().iter().enumerate() {
        let Some(ts) = cell else { continue };
        let (m, n, g) = dims.coords(idx);
        for (t, v) in ts.values().iter().enumerate() {
            writeln!(out, "{},{},{},{},{}", m + 1, n + 1, g + 1, t + 1, fmt_f64(*v))?;
        }
    }
    out.flush()?;
    Ok(())
}

fn omega_line(support: &Support) -> String {
    let lags: Vec<String> = support.lags().iter().map(ToString::to_string).collect();
    format!("# omega={}", lags.join(","))
}

/// `k,w` rows for the nonzero coefficients of a single-series fit.
pub fn write_sar_coefficients(path: impl AsRef<Path>, fit: &SparseFit) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{}", omega_line(&fit.support))?;
    writeln!(out, "k,w")?;
    for (j, &v) in fit.coefficients().iter().enumerate() {
        if v != 0.0 {
            writeln!(out, "{},{}", j + 1, fmt_f64(v))?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `gamma,k,w` rows for the nonzero coefficients of every segment.
pub fn write_tvsar_coefficients(path: impl AsRef<Path>, res: &TvSarResult) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{}", omega_line(&res.support))?;
    writeln!(out, "gamma,k,w")?;
    for (g, row) in res.coefficients.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v != 0.0 {
                writeln!(out, "{},{},{}", g + 1, j + 1, fmt_f64(v))?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// `m,n,gamma,k,w` rows: every support lag of every unmasked cell.
pub fn write_stvsar_coefficients(path: impl AsRef<Path>, res: &StvSarResult) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{}", omega_line(&res.support))?;
    writeln!(out, "m,n,gamma,k,w")?;
    let lags = res.support.lags();
    for (idx, cell) in res.cells.iter().enumerate() {
        let Some(cell) = cell else { continue };
        let (m, n, g) = res.dims.coords(idx);
        for (k, v) in lags.iter().zip(&cell.coefficients) {
            writeln!(out, "{},{},{},{},{}", m + 1, n + 1, g + 1, k, fmt_f64(*v))?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `m,n,gamma,value` for every grid slot; masked cells are written as `NA`.
pub fn write_seasonality_map(path: impl AsRef<Path>, map: &SeasonalityMap) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# k={}", map.lag)?;
    writeln!(out, "m,n,gamma,value")?;
    for (idx, v) in map.values.iter().enumerate() {
        let (m, n, g) = map.dims.coords(idx);
        match v {
            Some(v) => writeln!(out, "{},{},{},{}", m + 1, n + 1, g + 1, fmt_f64(*v))?,
            None => writeln!(out, "{},{},{},NA", m + 1, n + 1, g + 1)?,
        }
    }
    out.flush()?;
    Ok(())
}

/// A parsed coefficient or map table: comment metadata, header, numeric rows.
/// `NA` fields parse as NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub meta: BTreeMap<String, String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    /// 1-based lags listed in the `omega` comment.
    pub fn omega(&self) -> Vec<usize> {
        self.meta
            .get("omega")
            .map(|s| s.split(',').filter_map(|k| k.trim().parse().ok()).collect())
            .unwrap_or_default()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}

pub fn read_table(path: impl AsRef<Path>) -> Result<Table> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut meta = BTreeMap::new();
    let mut header = Vec::new();
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((k, v)) = comment.trim().split_once('=') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        if header.is_empty() {
            header = line.split(',').map(|s| s.trim().to_string()).collect();
            continue;
        }
        let row = line
            .split(',')
            .map(|f| match f.trim() {
                "NA" => Ok(f64::NAN),
                other => other
                    .parse::<f64>()
                    .map_err(|_| parse_err(path, i + 1, format!("'{other}' is not a number"))),
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(Table { meta, header, rows })
}

/// Machine-readable record of one `fit` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub model: String,
    pub solver: String,
    pub order: usize,
    pub sparsity: usize,
    pub tau0: Option<usize>,
    pub big_m: f64,
    /// 1-based lags.
    pub omega: Vec<usize>,
    pub objective: f64,
    pub best_bound: Option<f64>,
    pub gap: Option<f64>,
    pub nodes_explored: usize,
    pub certified: bool,
    pub box_limited: bool,
    pub wall_time_secs: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outputs: Vec<PathBuf>,
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?)
}
