//! Experiment output: error rows, rate fits and CSV emission.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{loglog_slope, quantile_band, RateFit};

pub const CSV_HEADER: [&str; 11] = [
    "experiment",
    "objective",
    "pipeline",
    "t",
    "scale_name",
    "scale_value",
    "p_or_thr",
    "error_mean",
    "q15",
    "q85",
    "slope",
];

/// One CSV line. Success-rate rows keep the rate in `error_mean` and leave
/// the band empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub experiment: String,
    pub objective: String,
    pub pipeline: String,
    pub t: Option<f64>,
    pub scale_name: String,
    pub scale_value: f64,
    pub p_or_thr: Option<f64>,
    pub error_mean: f64,
    pub q15: Option<f64>,
    pub q85: Option<f64>,
    /// Log-log slope across scales at this row's time.
    pub slope: Option<f64>,
}

/// Rate fit of one error series at the final time.
#[derive(Clone, Debug, PartialEq)]
pub struct FitSummary {
    pub experiment: String,
    pub objective: String,
    pub pipeline: String,
    pub p: Option<f64>,
    pub fit: RateFit,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub fits: Vec<FitSummary>,
    /// Named scalar checks computed along the way.
    pub diagnostics: Vec<(String, f64)>,
}

impl ExperimentReport {
    pub fn fit(&self, experiment: &str, objective: &str, p: Option<f64>) -> Option<&FitSummary> {
        self.fits
            .iter()
            .find(|f| f.experiment == experiment && f.objective == objective && f.p == p)
    }

    pub fn diagnostic(&self, name: &str) -> Option<f64> {
        self.diagnostics.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }

    /// Success rate stored for `(objective, pipeline, scale, thr)`.
    pub fn success_rate(&self, objective: &str, pipeline: &str, scale: f64, thr: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.objective == objective && r.pipeline == pipeline && r.scale_value == scale && r.p_or_thr == Some(thr))
            .map(|r| r.error_mean)
    }

    pub fn extend(&mut self, other: ExperimentReport) {
        self.rows.extend(other.rows);
        self.fits.extend(other.fits);
        self.diagnostics.extend(other.diagnostics);
    }
}

/// Labels shared by the rows of one error series.
#[derive(Clone, Debug)]
pub(crate) struct Series<'a> {
    pub experiment: &'a str,
    pub objective: &'a str,
    pub pipeline: &'a str,
    pub scale_name: &'a str,
    pub p: Option<f64>,
}

/// Summary of one `(scale, time)` cell: the reported error and the values
/// whose quantiles form the band.
#[derive(Clone, Debug, Default)]
pub(crate) struct Cell {
    pub mean: f64,
    pub spread: Vec<f64>,
}

impl Cell {
    pub fn mean_of(values: Vec<f64>) -> Self {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        Self { mean, spread: values }
    }
}

impl ExperimentReport {
    /// Appends rows for `cells[scale][time]`, scale major, with the per-time
    /// slope, and records the fit at the last time.
    pub(crate) fn push_series(&mut self, series: &Series<'_>, scales: &[f64], times: &[f64], cells: &[Vec<Cell>]) -> Result<()> {
        let slopes: Vec<Option<RateFit>> = (0..times.len())
            .map(|h| {
                let points: Vec<(f64, f64)> = scales.iter().zip(cells).map(|(&s, row)| (s, row[h].mean)).collect();
                loglog_slope(&points).ok()
            })
            .collect();
        for (&scale, row) in scales.iter().zip(cells) {
            for ((&t, cell), fit) in times.iter().zip(row).zip(&slopes) {
                let (q15, q85) = quantile_band(&cell.spread, 0.15, 0.85)?;
                self.rows.push(ReportRow {
                    experiment: series.experiment.into(),
                    objective: series.objective.into(),
                    pipeline: series.pipeline.into(),
                    t: Some(t),
                    scale_name: series.scale_name.into(),
                    scale_value: scale,
                    p_or_thr: series.p,
                    error_mean: cell.mean,
                    q15: Some(q15),
                    q85: Some(q85),
                    slope: fit.as_ref().map(|f| f.slope),
                });
            }
        }
        if let Some(Some(fit)) = slopes.last() {
            self.fits.push(FitSummary {
                experiment: series.experiment.into(),
                objective: series.objective.into(),
                pipeline: series.pipeline.into(),
                p: series.p,
                fit: fit.clone(),
            });
        }
        Ok(())
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Writes the header and every row.
pub fn write_csv<W: Write>(report: &ExperimentReport, writer: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for row in &report.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the report to `path`, creating missing parent directories.
pub fn emit_csv(report: &ExperimentReport, path: &Path) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let file = std::fs::File::create(path).map_err(io)?;
    write_csv(report, std::io::BufWriter::new(file)).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        kind => Error::Parse {
            path: path.to_path_buf(),
            message: format!("{kind:?}"),
        },
    })
}

pub fn read_csv(path: &Path) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_error(path, e))).collect()
}
