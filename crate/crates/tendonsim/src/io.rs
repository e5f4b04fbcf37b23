//! Dataset CSV files and the TOML run configuration.
//!
//! Datasets are plain CSV with a fixed eight-column header, optional `#`
//! comment lines, and one row per frame. Floats are written in Rust's
//! shortest round-trip form, so write followed by read reproduces values
//! exactly. Readers report the line number of anything malformed.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::ShoulderModel;
use crate::mapping::{Mat, TrainConfig};
use crate::motion::ProtocolSpec;
use crate::sensor::{SensorEmulation, SensorFrame};
use crate::tendon::{default_layout, TendonError, TendonLayout, TendonPath};

/// Column names of a dataset file, in order.
pub const DATASET_HEADER: [&str; 8] = [
    "frame",
    "time_s",
    "theta_deg",
    "phi_deg",
    "dl_F_mm",
    "dl_SF_mm",
    "dl_SR_mm",
    "dl_R_mm",
];

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
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
    #[error("{path}: header must be {expected:?}, found {found:?}")]
    BadHeader {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{path} line {line}: {reason}")]
    MalformedRow {
        path: PathBuf,
        line: u64,
        reason: String,
    },
    #[error("config {path}: {reason}")]
    Config { path: PathBuf, reason: String },
    #[error("config {path}: {source}")]
    Layout {
        path: PathBuf,
        #[source]
        source: TendonError,
    },
}

/// One timestamped sensor frame with its ground-truth pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetRow {
    pub frame: u64,
    pub time_s: f64,
    pub theta_deg: f64,
    pub phi_deg: f64,
    pub dl_mm: [f64; 4],
}

impl DatasetRow {
    pub fn deltas(&self) -> SensorFrame {
        SensorFrame::from_array(self.dl_mm)
    }
}

/// An in-memory dataset, ordered by frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub rows: Vec<DatasetRow>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Sensor columns (by tendon index, canonical order F, SF, SR, R) as a
    /// matrix with one row per frame.
    pub fn sensor_matrix(&self, tendon_indices: &[usize]) -> Mat {
        Mat::from_fn(self.rows.len(), tendon_indices.len(), |r, c| {
            self.rows[r].dl_mm[tendon_indices[c]]
        })
    }

    /// The (azimuth, elevation) columns as a matrix.
    pub fn pose_matrix(&self) -> Mat {
        Mat::from_fn(self.rows.len(), 2, |r, c| {
            if c == 0 {
                self.rows[r].theta_deg
            } else {
                self.rows[r].phi_deg
            }
        })
    }
}

/// Writes `dataset` as CSV, replacing any existing file.
pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<(), IoError> {
    let file = |e| IoError::File {
        path: path.to_path_buf(),
        source: e,
    };
    let csv_err = |e| IoError::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(DATASET_HEADER).map_err(csv_err)?;
    let mut record = Vec::with_capacity(8);
    for row in &dataset.rows {
        record.clear();
        record.push(row.frame.to_string());
        record.push(row.time_s.to_string());
        record.push(row.theta_deg.to_string());
        record.push(row.phi_deg.to_string());
        for v in row.dl_mm {
            record.push(v.to_string());
        }
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush().map_err(file)
}

/// Reads a dataset written by [`write_dataset`] (or by hand in the same
/// shape). `#` lines are comments. Errors carry the offending line number.
pub fn read_dataset(path: &Path) -> Result<Dataset, IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .from_path(path)
        .map_err(|e| IoError::Csv {
            path: path.to_path_buf(),
            source: e,
        })?;

    let headers = reader.headers().map_err(|e| IoError::Csv {
        path: path.to_path_buf(),
        source: e,
    })?;
    let found: Vec<&str> = headers.iter().map(|h| h.trim()).collect();
    if found != DATASET_HEADER {
        return Err(IoError::BadHeader {
            path: path.to_path_buf(),
            expected: DATASET_HEADER.join(","),
            found: found.join(","),
        });
    }

    let malformed = |line: u64, reason: String| IoError::MalformedRow {
        path: path.to_path_buf(),
        line,
        reason,
    };

    let mut rows = Vec::new();
    let mut last_frame: Option<u64> = None;
    for record in reader.records() {
        let record = record.map_err(|e| IoError::Csv {
            path: path.to_path_buf(),
            source: e,
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 8 {
            return Err(malformed(
                line,
                format!("expected 8 columns, found {}", record.len()),
            ));
        }
        let frame: u64 = record[0]
            .trim()
            .parse()
            .map_err(|_| malformed(line, format!("bad frame index {:?}", &record[0])))?;
        let mut floats = [0.0f64; 7];
        for (k, slot) in floats.iter_mut().enumerate() {
            let field = record[k + 1].trim();
            let value: f64 = field.parse().map_err(|_| {
                malformed(
                    line,
                    format!(
                        "column {} is not a number: {field:?}",
                        DATASET_HEADER[k + 1]
                    ),
                )
            })?;
            if !value.is_finite() {
                return Err(malformed(
                    line,
                    format!("column {} is not finite: {field:?}", DATASET_HEADER[k + 1]),
                ));
            }
            *slot = value;
        }
        if let Some(prev) = last_frame {
            if frame <= prev {
                return Err(malformed(
                    line,
                    format!("frame {frame} does not increase past {prev}"),
                ));
            }
        }
        last_frame = Some(frame);
        rows.push(DatasetRow {
            frame,
            time_s: floats[0],
            theta_deg: floats[1],
            phi_deg: floats[2],
            dl_mm: [floats[3], floats[4], floats[5], floats[6]],
        });
    }
    Ok(Dataset { rows })
}

/// The tendon routing section of a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LayoutSection {
    pub tendons: Vec<TendonPath>,
}

impl Default for LayoutSection {
    fn default() -> Self {
        Self {
            tendons: default_layout().tendons.clone(),
        }
    }
}

/// A full run configuration. Every section is optional in the file; missing
/// sections take the built-in defaults, and unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub model: ShoulderModel,
    pub layout: LayoutSection,
    pub sensor: SensorEmulation,
    pub train: TrainConfig,
    pub protocol: ProtocolSpec,
}

impl ConfigFile {
    /// Assembles the model and tendon sections into a validated layout.
    pub fn layout(&self) -> Result<TendonLayout, TendonError> {
        TendonLayout::from_parts(self.model.clone(), self.layout.tendons.clone())
    }
}

/// Parses a configuration file, reporting TOML problems (including unknown
/// keys) with their location.
pub fn load_config(path: &Path) -> Result<ConfigFile, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::File {
        path: path.to_path_buf(),
        source: e,
    })?;
    let config: ConfigFile = toml::from_str(&text).map_err(|e| IoError::Config {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    config.layout().map_err(|e| IoError::Layout {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(config)
}
