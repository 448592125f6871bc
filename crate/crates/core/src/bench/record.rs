use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, Mode};
use crate::synth::{Task, TaskFamily, TransformPair};

pub const STATUS_OK: &str = "ok";

/// One benchmark result row. Failed runs keep their row with an empty
/// `mi_est` and the error message in `status`.
///
/// Field order is the CSV column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub task: TaskFamily,
    pub transform: TransformPair,
    pub d: usize,
    pub rho: f64,
    pub n: usize,
    pub seed: u64,
    pub estimator: EstimatorKind,
    pub mi_true: f64,
    pub mi_true_stderr: f64,
    pub mi_est: Option<f64>,
    pub mode: Mode,
    pub wall_time_seconds: f64,
    pub status: String,
}

impl EstimateRecord {
    pub fn is_ok(&self) -> bool {
        self.status == STATUS_OK
    }

    /// The task this row was generated from.
    pub fn task_spec(&self) -> Result<Task> {
        Task::new(self.task, self.d, self.rho, self.transform)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecordFormat {
    Csv,
    Json,
}

impl RecordFormat {
    /// JSON for `.json` paths, CSV otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => RecordFormat::Json,
            _ => RecordFormat::Csv,
        }
    }
}

impl std::str::FromStr for RecordFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(RecordFormat::Csv),
            "json" => Ok(RecordFormat::Json),
            _ => Err(Error::ConfigInvalid(format!("unknown format {s:?} (csv, json)"))),
        }
    }
}

/// Writes rows of any serializable type. An empty CSV still gets its header.
pub(crate) fn write_rows<T: Serialize, W: Write>(
    rows: &[T],
    header: &[&str],
    format: RecordFormat,
    w: W,
) -> Result<()> {
    match format {
        RecordFormat::Csv => {
            let mut out = csv::Writer::from_writer(w);
            if rows.is_empty() {
                out.write_record(header)?;
            }
            for r in rows {
                out.serialize(r)?;
            }
            out.flush()?;
        }
        RecordFormat::Json => {
            let mut w = w;
            serde_json::to_writer_pretty(&mut w, rows)?;
            writeln!(w)?;
        }
    }
    Ok(())
}

pub(crate) fn read_rows<T: for<'de> Deserialize<'de>, R: Read>(format: RecordFormat, r: R) -> Result<Vec<T>> {
    match format {
        RecordFormat::Csv => {
            let mut rdr = csv::Reader::from_reader(r);
            rdr.deserialize().map(|row| row.map_err(Error::from)).collect()
        }
        RecordFormat::Json => Ok(serde_json::from_reader(r)?),
    }
}

pub(crate) const RECORD_HEADER: [&str; 13] = [
    "task",
    "transform",
    "d",
    "rho",
    "n",
    "seed",
    "estimator",
    "mi_true",
    "mi_true_stderr",
    "mi_est",
    "mode",
    "wall_time_seconds",
    "status",
];

/// Appends records to a CSV stream one at a time, flushing after each so
/// an interrupted run keeps every finished row.
pub struct CsvAppender<W: Write> {
    out: csv::Writer<W>,
    header_pending: bool,
}

impl<W: Write> CsvAppender<W> {
    /// `write_header` should be true for a new or empty file.
    pub fn new(w: W, write_header: bool) -> Self {
        CsvAppender { out: csv::WriterBuilder::new().has_headers(false).from_writer(w), header_pending: write_header }
    }

    pub fn push(&mut self, r: &EstimateRecord) -> Result<()> {
        if std::mem::take(&mut self.header_pending) {
            self.out.write_record(RECORD_HEADER)?;
        }
        self.out.serialize(r)?;
        self.out.flush()?;
        Ok(())
    }
}

pub fn write_records(records: &[EstimateRecord], path: impl AsRef<Path>, format: RecordFormat) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_rows(records, &RECORD_HEADER, format, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_records(path: impl AsRef<Path>, format: RecordFormat) -> Result<Vec<EstimateRecord>> {
    read_rows(format, BufReader::new(File::open(path)?))
}
