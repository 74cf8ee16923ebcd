//! Record types, datasets, train/calibration splitting and CSV ingestion.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("covariate dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("dataset is empty")]
    Empty,
    #[error("calibration proportion must lie in (0, 1), got {0}")]
    InvalidProportion(f64),
    #[error("cannot split {n} records with proportion {c_prop}: both parts need at least one record")]
    SplitSize { n: usize, c_prop: f64 },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("no covariate columns (expected w1..wp)")]
    NoCovariates,
    #[error("line {line}, column `{column}`: {reason}")]
    Parse { line: u64, column: String, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

/// One right-censored observation `(w, delta, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedRecord {
    pub w: Vec<f64>,
    /// Follow-up time `min(T, C)`.
    pub y: f64,
    /// `true` when the event was observed (`T <= C`).
    pub event: bool,
}

impl ObservedRecord {
    pub fn new(w: Vec<f64>, y: f64, event: bool) -> Result<Self, DataError> {
        if !y.is_finite() || y < 0.0 {
            return Err(DataError::InvalidRecord(format!(
                "follow-up time must be finite and nonnegative, got {y}"
            )));
        }
        if let Some(bad) = w.iter().find(|v| !v.is_finite()) {
            return Err(DataError::InvalidRecord(format!(
                "covariate values must be finite, got {bad}"
            )));
        }
        Ok(Self { w, y, event })
    }

    /// The event indicator for the given fitting role: the censoring role
    /// treats censored observations as its events.
    pub fn indicator(&self, censoring_role: bool) -> bool {
        self.event != censoring_role
    }
}

/// A complete draw `(w, T, C)`; only simulation and evaluation see these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullRecord {
    pub w: Vec<f64>,
    /// Latent event time.
    pub t: f64,
    /// Latent censoring time (`inf` when unknown).
    pub c: f64,
}

impl FullRecord {
    pub fn observed(&self) -> ObservedRecord {
        ObservedRecord {
            w: self.w.clone(),
            y: self.t.min(self.c),
            event: self.t <= self.c,
        }
    }
}

/// An immutable, nonempty collection of records sharing one covariate dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Arc<[ObservedRecord]>,
    dim: usize,
}

impl Dataset {
    pub fn new(records: Vec<ObservedRecord>) -> Result<Self, DataError> {
        let first = records.first().ok_or(DataError::Empty)?;
        let dim = first.w.len();
        for r in &records {
            if r.w.len() != dim {
                return Err(DataError::DimensionMismatch {
                    expected: dim,
                    found: r.w.len(),
                });
            }
            // re-validate: fields are public
            ObservedRecord::new(Vec::new(), r.y, r.event)?;
            if r.w.iter().any(|v| !v.is_finite()) {
                return Err(DataError::InvalidRecord("non-finite covariate".into()));
            }
        }
        Ok(Self {
            records: records.into(),
            dim,
        })
    }

    pub fn from_full(records: &[FullRecord]) -> Result<Self, DataError> {
        Self::new(records.iter().map(FullRecord::observed).collect())
    }

    pub fn records(&self) -> &[ObservedRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Subset in the order of `indices`.
    pub fn subset(&self, indices: &[usize]) -> Result<Self, DataError> {
        Self::new(indices.iter().map(|&i| self.records[i].clone()).collect())
    }
}

/// A disjoint train/calibration partition of `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub cal: Vec<usize>,
}

/// Calibration-set size `round_half_up(c_prop * n)`.
pub fn calibration_size(n: usize, c_prop: f64) -> usize {
    (c_prop * n as f64 + 0.5).floor() as usize
}

/// Uniformly random partition of `dataset` into training and calibration
/// indices, deterministic in `seed`. Both index lists are sorted.
pub fn split(dataset: &Dataset, c_prop: f64, seed: u64) -> Result<SplitIndices, DataError> {
    split_len(dataset.len(), c_prop, seed)
}

pub fn split_len(n: usize, c_prop: f64, seed: u64) -> Result<SplitIndices, DataError> {
    if !(c_prop > 0.0 && c_prop < 1.0) {
        return Err(DataError::InvalidProportion(c_prop));
    }
    let n_cal = calibration_size(n, c_prop);
    if n < 2 || n_cal == 0 || n_cal >= n {
        return Err(DataError::SplitSize { n, c_prop });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut cal = order[..n_cal].to_vec();
    let mut train = order[n_cal..].to_vec();
    cal.sort_unstable();
    train.sort_unstable();
    Ok(SplitIndices { train, cal })
}

/// Column names used when reading a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSpec {
    /// Explicit covariate columns; `None` picks every `w<k>` column ordered by `k`.
    pub covariates: Option<Vec<String>>,
    pub time: String,
    pub event: String,
}

impl Default for ColumnSpec {
    fn default() -> Self {
        Self {
            covariates: None,
            time: "y".into(),
            event: "delta".into(),
        }
    }
}

fn covariate_index(name: &str) -> Option<usize> {
    name.strip_prefix('w')?.parse().ok()
}

fn covariate_columns(headers: &csv::StringRecord, spec: Option<&[String]>) -> Result<Vec<usize>, DataError> {
    let cols = match spec {
        Some(names) => names
            .iter()
            .map(|n| find_column(headers, n))
            .collect::<Result<Vec<_>, _>>()?,
        None => {
            let mut found: Vec<(usize, usize)> = headers
                .iter()
                .enumerate()
                .filter_map(|(pos, h)| covariate_index(h.trim()).map(|k| (k, pos)))
                .collect();
            found.sort_unstable();
            found.into_iter().map(|(_, pos)| pos).collect()
        }
    };
    if cols.is_empty() {
        return Err(DataError::NoCovariates);
    }
    Ok(cols)
}

fn find_column(headers: &csv::StringRecord, name: &str) -> Result<usize, DataError> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| DataError::MissingColumn(name.to_string()))
}

fn parse_cell(row: &csv::StringRecord, col: usize, name: &str, line: u64) -> Result<f64, DataError> {
    let raw = row.get(col).unwrap_or("").trim();
    if raw.is_empty() {
        return Err(DataError::Parse {
            line,
            column: name.into(),
            reason: "missing value".into(),
        });
    }
    raw.parse::<f64>().map_err(|e| DataError::Parse {
        line,
        column: name.into(),
        reason: format!("cannot parse `{raw}`: {e}"),
    })
}

fn parse_event(row: &csv::StringRecord, col: usize, name: &str, line: u64) -> Result<bool, DataError> {
    let v = parse_cell(row, col, name, line)?;
    if v == 0.0 {
        Ok(false)
    } else if v == 1.0 {
        Ok(true)
    } else {
        Err(DataError::Parse {
            line,
            column: name.into(),
            reason: format!("event indicator must be 0 or 1, got {v}"),
        })
    }
}

fn parse_time(row: &csv::StringRecord, col: usize, name: &str, line: u64) -> Result<f64, DataError> {
    let v = parse_cell(row, col, name, line)?;
    if !v.is_finite() || v < 0.0 {
        return Err(DataError::Parse {
            line,
            column: name.into(),
            reason: format!("time must be finite and nonnegative, got {v}"),
        });
    }
    Ok(v)
}

fn parse_covariates(
    row: &csv::StringRecord,
    cols: &[usize],
    headers: &csv::StringRecord,
    line: u64,
) -> Result<Vec<f64>, DataError> {
    cols.iter()
        .map(|&c| {
            let name = headers.get(c).unwrap_or("?");
            let v = parse_cell(row, c, name, line)?;
            if !v.is_finite() {
                return Err(DataError::Parse {
                    line,
                    column: name.into(),
                    reason: "covariate must be finite".into(),
                });
            }
            Ok(v)
        })
        .collect()
}

fn open_reader(path: &Path) -> Result<csv::Reader<BufReader<File>>, DataError> {
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file)))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> DataError + '_ {
    move |source| DataError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads `w1..wp, y, delta` records from any reader.
pub fn read_dataset<R: Read>(reader: R, spec: &ColumnSpec) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    read_dataset_inner(&mut rdr, spec, Path::new("<input>"))
}

fn read_dataset_inner<R: Read>(rdr: &mut csv::Reader<R>, spec: &ColumnSpec, path: &Path) -> Result<Dataset, DataError> {
    let headers = rdr.headers().map_err(csv_err(path))?.clone();
    let covs = covariate_columns(&headers, spec.covariates.as_deref())?;
    let ycol = find_column(&headers, &spec.time)?;
    let dcol = find_column(&headers, &spec.event)?;
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(csv_err(path))?;
        let line = row.position().map_or(0, |p| p.line());
        let w = parse_covariates(&row, &covs, &headers, line)?;
        let y = parse_time(&row, ycol, &spec.time, line)?;
        let event = parse_event(&row, dcol, &spec.event, line)?;
        records.push(ObservedRecord { w, y, event });
    }
    Dataset::new(records)
}

/// Reads an observed dataset from a CSV file.
pub fn read_csv(path: &Path, spec: &ColumnSpec) -> Result<Dataset, DataError> {
    let mut rdr = open_reader(path)?;
    read_dataset_inner(&mut rdr, spec, path)
}

/// Reads covariate rows only (`w1..wp`); other columns are ignored.
pub fn read_covariates_csv(path: &Path) -> Result<Vec<Vec<f64>>, DataError> {
    let mut rdr = open_reader(path)?;
    let headers = rdr.headers().map_err(csv_err(path))?.clone();
    let covs = covariate_columns(&headers, None)?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(csv_err(path))?;
        let line = row.position().map_or(0, |p| p.line());
        out.push(parse_covariates(&row, &covs, &headers, line)?);
    }
    Ok(out)
}

/// Reads records that carry the latent event time `t` (and optionally `c`).
pub fn read_full_csv(path: &Path) -> Result<Vec<FullRecord>, DataError> {
    let mut rdr = open_reader(path)?;
    let headers = rdr.headers().map_err(csv_err(path))?.clone();
    let covs = covariate_columns(&headers, None)?;
    let tcol = find_column(&headers, "t")?;
    let ccol = find_column(&headers, "c").ok();
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(csv_err(path))?;
        let line = row.position().map_or(0, |p| p.line());
        let w = parse_covariates(&row, &covs, &headers, line)?;
        let t = parse_time(&row, tcol, "t", line)?;
        let c = match ccol {
            Some(col) => {
                let v = parse_cell(&row, col, "c", line)?;
                if v.is_nan() || v < 0.0 {
                    return Err(DataError::Parse {
                        line,
                        column: "c".into(),
                        reason: format!("censoring time must be nonnegative, got {v}"),
                    });
                }
                v
            }
            None => f64::INFINITY,
        };
        out.push(FullRecord { w, t, c });
    }
    Ok(out)
}

fn covariate_header(dim: usize) -> Vec<String> {
    (1..=dim).map(|k| format!("w{k}")).collect()
}

/// Creates a buffered file writer, surfacing the path on failure.
pub fn create_file(path: &Path) -> Result<BufWriter<File>, DataError> {
    File::create(path).map(BufWriter::new).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `w1..wp, y, delta`. Floats use the shortest round-trip representation.
pub fn write_dataset<W: Write>(writer: W, dataset: &Dataset) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = covariate_header(dataset.dim());
    header.extend(["y".to_string(), "delta".to_string()]);
    wtr.write_record(&header)?;
    for r in dataset.records() {
        let mut row: Vec<String> = r.w.iter().map(|v| v.to_string()).collect();
        row.push(r.y.to_string());
        row.push(if r.event { "1" } else { "0" }.to_string());
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_csv(dataset: &Dataset, path: &Path) -> Result<(), DataError> {
    write_dataset(create_file(path)?, dataset).map_err(csv_err(path))
}

/// Writes `w1..wp, t, c, y, delta`. An empty slice produces a header-only file
/// with `dim` covariate columns.
pub fn write_full<W: Write>(writer: W, records: &[FullRecord], dim: usize) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = covariate_header(dim);
    header.extend(["t", "c", "y", "delta"].map(String::from));
    wtr.write_record(&header)?;
    for r in records {
        let o = r.observed();
        let mut row: Vec<String> = r.w.iter().map(|v| v.to_string()).collect();
        row.extend([
            r.t.to_string(),
            r.c.to_string(),
            o.y.to_string(),
            if o.event { "1" } else { "0" }.to_string(),
        ]);
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_full_csv(records: &[FullRecord], dim: usize, path: &Path) -> Result<(), DataError> {
    write_full(create_file(path)?, records, dim).map_err(csv_err(path))
}

/// Writes a table of serializable rows with a fixed header. Empty input gives a header-only file.
pub fn write_rows<W: Write, T: Serialize>(writer: W, header: &[&str], rows: &[T]) -> Result<(), csv::Error> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    wtr.write_record(header)?;
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_rows_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<(), DataError> {
    write_rows(create_file(path)?, header, rows).map_err(csv_err(path))
}
