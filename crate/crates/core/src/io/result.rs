use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcher::{MatchConfig, MatchResult, ModelSpec};
use crate::regression::KernelRegressor;
use crate::sample::SampleSet;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MATCH_SCHEMA: &str = "cdom.match_result";
pub const MATCH_SCHEMA_VERSION: u32 = 1;
pub const REGRESSOR_SCHEMA: &str = "cdom.kernel_regressor";
const REGRESSOR_SCHEMA_VERSION: u32 = 1;

/// Writes `bytes` to a temporary file beside `path`, then renames it over
/// `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn check_schema(path: &Path, found: &str, version: u32, want: &str, want_version: u32) -> Result<()> {
    if found != want || version != want_version {
        return Err(Error::invalid(format!(
            "{}: expected schema {want} v{want_version}, found {found} v{version}",
            path.display()
        )));
    }
    Ok(())
}

/// Final score of one model arm of a multi-arm run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub spec: ModelSpec,
    pub score: f64,
}

/// Everything a match run produced plus the configuration that reproduces
/// it. Carries no timestamps, so equal runs serialize to equal bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchDocument {
    pub schema: String,
    pub schema_version: u32,
    pub tool_version: String,
    pub method: String,
    pub config: MatchConfig,
    pub arms: Vec<ArmSummary>,
    pub best_arm: usize,
    /// Fraction of correct pairs when a reference pairing was supplied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    pub result: MatchResult,
}

impl MatchDocument {
    pub fn new(method: &str, config: MatchConfig, arms: Vec<ArmSummary>, best_arm: usize, result: MatchResult) -> Self {
        Self {
            schema: MATCH_SCHEMA.to_string(),
            schema_version: MATCH_SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            method: method.to_string(),
            config,
            arms,
            best_arm,
            accuracy: None,
            result,
        }
    }
}

pub fn save_match_document(doc: &MatchDocument, path: impl AsRef<Path>) -> Result<()> {
    write_json(doc, path.as_ref())
}

pub fn load_match_document(path: impl AsRef<Path>) -> Result<MatchDocument> {
    let path = path.as_ref();
    let text = fs::read(path).map_err(|e| Error::io(path, e))?;
    let doc: MatchDocument = serde_json::from_slice(&text)?;
    check_schema(path, &doc.schema, doc.schema_version, MATCH_SCHEMA, MATCH_SCHEMA_VERSION)?;
    Ok(doc)
}

/// On-disk form of a fitted [`KernelRegressor`]; matrices are lists of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorDocument {
    pub schema: String,
    pub schema_version: u32,
    pub tau: f64,
    pub delta: f64,
    pub centers: Vec<Vec<f64>>,
    pub weights: Vec<Vec<f64>>,
}

impl From<&KernelRegressor> for RegressorDocument {
    fn from(m: &KernelRegressor) -> Self {
        let w = m.weights();
        Self {
            schema: REGRESSOR_SCHEMA.to_string(),
            schema_version: REGRESSOR_SCHEMA_VERSION,
            tau: m.tau(),
            delta: m.delta(),
            centers: m.centers().rows().map(<[f64]>::to_vec).collect(),
            weights: (0..w.nrows()).map(|i| w.row(i).iter().copied().collect()).collect(),
        }
    }
}

impl RegressorDocument {
    pub fn into_model(self) -> Result<KernelRegressor> {
        let centers = SampleSet::from_rows(&self.centers)?;
        let cols = self.weights.first().map_or(0, Vec::len);
        if self.weights.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("weight rows have different lengths"));
        }
        let flat: Vec<f64> = self.weights.concat();
        let weights = DMatrix::from_row_slice(self.weights.len(), cols, &flat);
        KernelRegressor::from_parts(centers, weights, self.tau, self.delta)
    }
}

pub fn save_regressor(m: &KernelRegressor, path: impl AsRef<Path>) -> Result<()> {
    write_json(&RegressorDocument::from(m), path.as_ref())
}

pub fn load_regressor(path: impl AsRef<Path>) -> Result<KernelRegressor> {
    let path = path.as_ref();
    let text = fs::read(path).map_err(|e| Error::io(path, e))?;
    let doc: RegressorDocument = serde_json::from_slice(&text)?;
    check_schema(path, &doc.schema, doc.schema_version, REGRESSOR_SCHEMA, REGRESSOR_SCHEMA_VERSION)?;
    doc.into_model()
}
