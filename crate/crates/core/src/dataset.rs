//! Patient CSV files and JSON run reports.
//!
//! Patient files have the header `k,GL,CH,IS,IL` (any column order) and one
//! row per 15-minute step, `k` running 1, 2, 3, ...

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolver::{GaConfig, GenerationStats};
use crate::fitness::{Fitness, ObjectiveId};
use crate::mapper::Chromosome;
use crate::simulate::{EstimatedSeries, PatientSeries, SeriesError};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

const COLUMNS: [&str; 5] = ["k", "GL", "CH", "IS", "IL"];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("I/O error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: expected k = {expected}, found {found}")]
    NonContiguousIndex { row: usize, expected: u64, found: String },
    #[error("row {row}: {column} must be non-negative, got {value}")]
    NegativeInput { row: usize, column: String, value: f64 },
    #[error("row {row}: glucose must be positive, got {value}")]
    InvalidGlucose { row: usize, value: f64 },
    #[error("row {row}, column {column}: {message}")]
    ParseError { row: usize, column: String, message: String },
    #[error("file has no data rows")]
    Empty,
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed report: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Read a patient file. The patient id is the file stem.
pub fn load_patient(path: &Path) -> Result<PatientSeries, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "patient".to_string());
    parse_patient(&id, &text)
}

/// Parse patient CSV text. Row numbers in errors count data rows from 1.
pub fn parse_patient(patient_id: &str, text: &str) -> Result<PatientSeries, DatasetError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let mut idx = [0usize; 5];
    for (slot, name) in idx.iter_mut().zip(COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DatasetError::MissingColumn(name.to_string()))?;
    }

    let mut cols: [Vec<f64>; 4] = Default::default();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let field = |c: usize| record.get(idx[c]).unwrap_or("");
        let k = field(0);
        if k.parse::<u64>().ok() != Some(row as u64) {
            return Err(DatasetError::NonContiguousIndex {
                row,
                expected: row as u64,
                found: k.to_string(),
            });
        }
        for c in 1..5 {
            let raw = field(c);
            let value: f64 = raw.parse().map_err(|_| DatasetError::ParseError {
                row,
                column: COLUMNS[c].to_string(),
                message: format!("`{raw}` is not a number"),
            })?;
            if !value.is_finite() {
                return Err(DatasetError::ParseError {
                    row,
                    column: COLUMNS[c].to_string(),
                    message: format!("`{raw}` is not finite"),
                });
            }
            if c == 1 && value <= 0.0 {
                return Err(DatasetError::InvalidGlucose { row, value });
            }
            if c > 1 && value < 0.0 {
                return Err(DatasetError::NegativeInput {
                    row,
                    column: COLUMNS[c].to_string(),
                    value,
                });
            }
            cols[c - 1].push(value);
        }
    }
    let [gl, ch, is, il] = cols;
    PatientSeries::new(patient_id, gl, ch, is, il).map_err(|e| match e {
        SeriesError::Empty => DatasetError::Empty,
        // Values were validated above and columns are filled together.
        other => unreachable!("validated series rejected: {other}"),
    })
}

/// Write a patient file that [`load_patient`] reads back exactly.
pub fn write_patient(path: &Path, series: &PatientSeries) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(COLUMNS)?;
    for i in 0..series.len() {
        w.write_record([
            (i + 1).to_string(),
            series.gl()[i].to_string(),
            series.ch()[i].to_string(),
            series.is()[i].to_string(),
            series.il()[i].to_string(),
        ])?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// One step of the actual-vs-estimated table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub k: usize,
    pub gl: f64,
    /// `None` when the estimate is not finite.
    pub gl_hat: Option<f64>,
}

pub fn comparison_table(series: &PatientSeries, estimated: &EstimatedSeries) -> Vec<TableRow> {
    series
        .gl()
        .iter()
        .zip(&estimated.gl_hat)
        .enumerate()
        .map(|(i, (&gl, &est))| TableRow {
            k: i + 1,
            gl,
            gl_hat: est.is_finite().then_some(est),
        })
        .collect()
}

/// Values of all five objectives for the best individual.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ObjectiveValues {
    pub f1: Option<f64>,
    pub f2: Option<f64>,
    pub f3: Option<f64>,
    pub f4: Option<f64>,
    pub f5: Option<f64>,
}

impl ObjectiveValues {
    pub fn get(&self, id: ObjectiveId) -> Option<f64> {
        match id {
            ObjectiveId::F1 => self.f1,
            ObjectiveId::F2 => self.f2,
            ObjectiveId::F3 => self.f3,
            ObjectiveId::F4 => self.f4,
            ObjectiveId::F5 => self.f5,
        }
    }

    pub fn set(&mut self, id: ObjectiveId, v: Option<f64>) {
        let slot = match id {
            ObjectiveId::F1 => &mut self.f1,
            ObjectiveId::F2 => &mut self.f2,
            ObjectiveId::F3 => &mut self.f3,
            ObjectiveId::F4 => &mut self.f4,
            ObjectiveId::F5 => &mut self.f5,
        };
        *slot = v;
    }
}

/// Non-deterministic fields, kept apart so reports can be compared.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub generated_at: u64,
}

/// Everything needed to reproduce and inspect one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub patient: String,
    pub grammar: String,
    pub objective: ObjectiveId,
    pub seed: u64,
    pub run: usize,
    pub config: GaConfig,
    pub chromosome: Chromosome,
    /// Phenotype exactly as derived from the grammar.
    pub phenotype: Option<String>,
    /// Canonical fully parenthesized form.
    pub expression: Option<String>,
    pub best_fitness: Fitness,
    pub pae_percent: Option<f64>,
    pub best_generation: usize,
    pub objectives: ObjectiveValues,
    pub history: Vec<GenerationStats>,
    pub table: Vec<TableRow>,
    pub metadata: ReportMetadata,
}

impl RunReport {
    /// Copy with the non-deterministic metadata cleared.
    pub fn without_metadata(&self) -> RunReport {
        RunReport {
            metadata: ReportMetadata::default(),
            ..self.clone()
        }
    }
}

pub fn report_to_string(report: &RunReport) -> Result<String, DatasetError> {
    Ok(serde_json::to_string_pretty(report)?)
}

pub fn write_report(path: &Path, report: &RunReport) -> Result<(), DatasetError> {
    let mut text = report_to_string(report)?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_report(path: &Path) -> Result<RunReport, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}

/// The bundled demonstration patient (97 steps).
pub fn joy_wilson() -> PatientSeries {
    parse_patient("joy_wilson", include_str!("../assets/datasets/joy_wilson.csv"))
        .expect("bundled dataset is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bundled_dataset() {
        let s = joy_wilson();
        assert_eq!(s.len(), 97);
        assert_eq!(s.gl()[0], 209.1453);
        assert!((s.glucose_range() - 154.18167).abs() < 1e-9);
    }

    #[test]
    fn column_order_is_free() {
        let s = parse_patient("p", "GL,k,IL,IS,CH\n100,1,0,0,5\n110,2,1,0,0\n").unwrap();
        assert_eq!(s.gl(), &[100.0, 110.0]);
        assert_eq!(s.ch(), &[5.0, 0.0]);
        assert_eq!(s.il(), &[0.0, 1.0]);
    }

    #[test]
    fn errors_name_the_row() {
        let cases = [
            ("k,GL,CH,IS\n1,100,0,0\n", "missing column `IL`"),
            ("k,GL,CH,IS,IL\n1,100,0,0,0\n3,100,0,0,0\n", "row 2"),
            ("k,GL,CH,IS,IL\n1,100,0,-1,0\n", "row 1: IS"),
            ("k,GL,CH,IS,IL\n1,100,0,0,0\n2,0,0,0,0\n", "row 2: glucose"),
            ("k,GL,CH,IS,IL\n1,abc,0,0,0\n", "row 1, column GL"),
        ];
        for (text, want) in cases {
            let err = parse_patient("p", text).unwrap_err().to_string();
            assert!(err.contains(want), "{err} should mention {want}");
        }
        assert!(matches!(parse_patient("p", "k,GL,CH,IS,IL\n"), Err(DatasetError::Empty)));
    }

    #[test]
    fn report_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let report = RunReport {
            schema_version: REPORT_SCHEMA_VERSION,
            patient: "p".into(),
            grammar: "G11".into(),
            objective: ObjectiveId::F5,
            seed: 7,
            run: 0,
            config: GaConfig::default(),
            chromosome: Chromosome::new(vec![1, 2, 3]).unwrap(),
            phenotype: None,
            expression: None,
            best_fitness: Fitness::Worst,
            pae_percent: None,
            best_generation: 0,
            objectives: ObjectiveValues::default(),
            history: vec![],
            table: vec![
                TableRow { k: 1, gl: 1.5, gl_hat: None },
                // needs exact float parsing to survive the round trip
                TableRow { k: 2, gl: 0.1 + 0.2, gl_hat: Some(94.28148412653606) },
            ],
            metadata: ReportMetadata { generated_at: 5 },
        };
        let path = dir.path().join("r.report");
        write_report(&path, &report).unwrap();
        let back = read_report(&path).unwrap();
        assert_eq!(back, report);
        let json = fs::read_to_string(&path).unwrap();
        assert!(json.contains("\"best_fitness\": null"));
        assert_eq!(back.without_metadata().metadata.generated_at, 0);
    }

    proptest! {
        #[test]
        fn patient_files_round_trip(
            rows in proptest::collection::vec(
                (1e-3f64..1e4, 0.0f64..1e3, 0.0f64..1e2, 0.0f64..1e2), 1..40)
        ) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("someone.csv");
            let s = PatientSeries::new(
                "someone",
                rows.iter().map(|r| r.0).collect(),
                rows.iter().map(|r| r.1).collect(),
                rows.iter().map(|r| r.2).collect(),
                rows.iter().map(|r| r.3).collect(),
            ).unwrap();
            write_patient(&path, &s).unwrap();
            prop_assert_eq!(load_patient(&path).unwrap(), s);
        }
    }
}
