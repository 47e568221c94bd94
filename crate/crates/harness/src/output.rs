//! Result rows, CSV output and the metadata sidecar.

use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Upper,
    Lower,
    LowerPlus,
    Approx,
    Exact,
    Trivial,
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BoundKind::Upper => "upper",
            BoundKind::Lower => "lower",
            BoundKind::LowerPlus => "lower_plus",
            BoundKind::Approx => "approx",
            BoundKind::Exact => "exact",
            BoundKind::Trivial => "trivial",
        };
        f.write_str(s)
    }
}

/// One CSV line. Field order is the column order.
///
/// Missing values (an unavailable oracle, a bound without an entropy) are
/// written as empty cells. `stderr` is in bits per symbol.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub snr_db: f64,
    pub method: String,
    pub params: String,
    pub mi_bits_per_symbol: Option<f64>,
    pub mi_bits_total: Option<f64>,
    pub h_bits: Option<f64>,
    pub bound_kind: BoundKind,
    pub mean_visited_nodes: Option<f64>,
    pub stderr: Option<f64>,
    pub n_sentinels: usize,
    pub wall_ms: Option<f64>,
}

impl ResultRow {
    pub fn is_available(&self) -> bool {
        self.mi_bits_total.is_some()
    }
}

pub const COLUMNS: [&str; 11] = [
    "snr_db",
    "method",
    "params",
    "mi_bits_per_symbol",
    "mi_bits_total",
    "h_bits",
    "bound_kind",
    "mean_visited_nodes",
    "stderr",
    "n_sentinels",
    "wall_ms",
];

/// Streams rows to a CSV file, flushing after each one.
pub struct CsvSink<W: Write> {
    writer: csv::Writer<W>,
}

impl CsvSink<File> {
    pub fn create(path: &Path) -> Result<Self, HarnessError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        Self::new(File::create(path)?)
    }
}

impl<W: Write> CsvSink<W> {
    pub fn new(inner: W) -> Result<Self, HarnessError> {
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(inner);
        writer.write_record(COLUMNS)?;
        writer.flush()?;
        Ok(Self { writer })
    }

    pub fn write(&mut self, row: &ResultRow) -> Result<(), HarnessError> {
        self.writer.serialize(row)?;
        self.writer.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W, HarnessError> {
        self.writer
            .into_inner()
            .map_err(|e| HarnessError::Io(std::io::Error::other(e.to_string())))
    }
}

#[derive(Debug, Serialize)]
struct Meta<'a> {
    tool: &'static str,
    version: &'static str,
    columns: [&'static str; 11],
    config: &'a ExperimentConfig,
}

pub fn meta_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Writes `<out>.meta.json` with the effective config and the code version.
pub fn write_meta(out: &Path, config: &ExperimentConfig) -> Result<PathBuf, HarnessError> {
    let path = meta_path(out);
    let meta = Meta {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        columns: COLUMNS,
        config,
    };
    let text = serde_json::to_string_pretty(&meta).map_err(|e| HarnessError::Io(std::io::Error::other(e)))?;
    std::fs::write(&path, text + "\n")?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_empty_cells() {
        let mut sink = CsvSink::new(Vec::new()).unwrap();
        sink.write(&ResultRow {
            snr_db: -2.5,
            method: "truth".into(),
            params: "unavailable".into(),
            mi_bits_per_symbol: None,
            mi_bits_total: None,
            h_bits: None,
            bound_kind: BoundKind::Exact,
            mean_visited_nodes: None,
            stderr: None,
            n_sentinels: 0,
            wall_ms: None,
        })
        .unwrap();
        let text = String::from_utf8(sink.into_inner().unwrap()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), COLUMNS.join(","));
        assert_eq!(lines.next().unwrap(), "-2.5,truth,unavailable,,,,exact,,,0,");
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(meta_path(Path::new("out/fig5.csv")), PathBuf::from("out/fig5.csv.meta.json"));
    }
}
