//! File formats: parameter systems, partitions, gauge transforms and
//! recovery reports as JSON; matrices as headerless CSV. All indices in
//! these formats are 1-based.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    validate_system, CommunityAssignment, ConnectivityMatrix, DegreeParams, ExpectedMatrix,
    MatrixKind, ModelError, ParameterSystem, DEFAULT_RANK_TOL,
};
use crate::partitions::{GaugeTransform, Partition};
use crate::recovery::RecoveryReport;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("rejected system: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemJson {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub z: Vec<usize>,
    pub theta: Vec<f64>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
}

impl From<&ParameterSystem> for SystemJson {
    fn from(sys: &ParameterSystem) -> Self {
        Self {
            n: sys.n(),
            k: sys.k(),
            z: sys.z().to_one_based(),
            theta: sys.theta().to_vec(),
            b: sys.b().rows(),
        }
    }
}

impl SystemJson {
    /// Converts to a system, rejecting anything that fails
    /// [`validate_system`].
    pub fn into_system(self) -> Result<ParameterSystem, IoError> {
        if self.z.len() != self.n {
            return Err(IoError::Invalid(format!(
                "n = {} but z has {} entries",
                self.n,
                self.z.len()
            )));
        }
        if self.b.len() != self.k {
            return Err(IoError::Invalid(format!(
                "K = {} but B has {} rows",
                self.k,
                self.b.len()
            )));
        }
        let sys = ParameterSystem::new(
            CommunityAssignment::from_one_based(&self.z, self.k)?,
            DegreeParams(self.theta),
            ConnectivityMatrix::from_rows(&self.b)?,
        )?;
        let report = validate_system(&sys, DEFAULT_RANK_TOL);
        if !report.is_valid() {
            return Err(IoError::Invalid(report.reasons().join("; ")));
        }
        Ok(sys)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionJson {
    pub n: usize,
    pub blocks: Vec<Vec<usize>>,
}

impl From<&Partition> for PartitionJson {
    fn from(p: &Partition) -> Self {
        Self {
            n: p.n(),
            blocks: p
                .blocks()
                .iter()
                .map(|b| b.iter().map(|i| i + 1).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeJson {
    pub perm: Vec<usize>,
    pub scale: Vec<f64>,
}

impl From<&GaugeTransform> for GaugeJson {
    fn from(g: &GaugeTransform) -> Self {
        Self {
            perm: g.perm().iter().map(|p| p + 1).collect(),
            scale: g.scale().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportJson {
    #[serde(flatten)]
    pub system: SystemJson,
    pub residual: f64,
    pub diagonal: Vec<f64>,
    pub witness_counts: Vec<usize>,
    pub theta_spread: Vec<f64>,
    pub flags: Vec<String>,
}

impl From<&RecoveryReport> for ReportJson {
    fn from(r: &RecoveryReport) -> Self {
        Self {
            system: SystemJson::from(&r.system),
            residual: r.residual,
            diagonal: r.diagonal.clone(),
            witness_counts: r.witness_counts.clone(),
            theta_spread: r.theta_spread.clone(),
            flags: r.flags.clone(),
        }
    }
}

fn open(path: &Path) -> Result<File, IoError> {
    File::open(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

fn create(path: &Path) -> Result<File, IoError> {
    File::create(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_system(path: &Path) -> Result<ParameterSystem, IoError> {
    let raw: SystemJson = serde_json::from_reader(open(path)?)?;
    raw.into_system()
}

pub fn write_system(path: &Path, sys: &ParameterSystem) -> Result<(), IoError> {
    write_json(path, &SystemJson::from(sys))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

/// Parses `n` rows of `n` comma-separated floats.
pub fn parse_matrix_csv<R: Read>(reader: R) -> Result<DMatrix<f64>, IoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| IoError::Csv(e.to_string()))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(c, field)| {
                field.parse::<f64>().map_err(|_| {
                    IoError::Csv(format!(
                        "row {}, column {}: not a number: {field:?}",
                        r + 1,
                        c + 1
                    ))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 {
        return Err(IoError::Csv("empty matrix".into()));
    }
    if let Some(r) = rows.iter().position(|row| row.len() != n) {
        return Err(IoError::Csv(format!(
            "row {} has {} entries, expected {n}",
            r + 1,
            rows[r].len()
        )));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// 17 significant digits, so every `f64` survives the round trip.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let fields: Vec<String> = row.iter().map(|&x| format_float(x)).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>, IoError> {
    parse_matrix_csv(open(path)?)
}

pub fn read_expected(path: &Path, kind: MatrixKind) -> Result<ExpectedMatrix, IoError> {
    Ok(ExpectedMatrix::new(read_matrix(path)?, kind)?)
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<(), IoError> {
    create(path)?
        .write_all(matrix_to_csv(m).as_bytes())
        .map_err(|source| IoError::File {
            path: path.display().to_string(),
            source,
        })
}
