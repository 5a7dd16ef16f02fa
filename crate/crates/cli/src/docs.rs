//! Output documents. Every JSON artifact is a [`Document`] around one of the
//! result types here, and parses back into an equal value.

use freeatoms::atoms::{AtomReport, CompressionPair, EigenvalueReport};
use freeatoms::linearize::{EquivalenceReport, LinearPencil};
use freeatoms::{CMat, OracleReport};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document<T> {
    pub config: RunConfig,
    /// Invariants that failed; `--strict` turns a non-empty list into exit 4.
    pub breaches: Vec<String>,
    pub result: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityPoint {
    pub x: f64,
    pub density: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvolveResult {
    pub y: f64,
    /// Trapezoid-rule integral of the density over the grid.
    pub grid_mass: f64,
    pub points: Vec<DensityPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanEntry {
    #[serde(with = "freeatoms::linalg::mat_serde")]
    pub location: CMat,
    pub report: Option<AtomReport>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub entries: Vec<ScanEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecomposeResult {
    pub report: AtomReport,
    /// Present when `E_n(p)` was singular and the support was compressed.
    pub regularization: Option<(CompressionPair, AtomReport)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearizeResult {
    pub polynomial: String,
    pub pencil: LinearPencil,
    /// `B`, `C`, `D`, `D'` in the polynomial-matrix text format.
    pub certificate: String,
    pub certificate_verified: bool,
    pub integer_coefficients: bool,
    pub equivalence: Option<EquivalenceReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    /// `λ` for a polynomial, the scalar location for a model.
    pub lambda: f64,
    pub pipeline_mass: Option<f64>,
    pub oracle_mass: f64,
    pub std_error: f64,
    /// `2/N + 3·SE`.
    pub tolerance: f64,
    pub discrepancy: Option<f64>,
    pub agree: bool,
    pub pipeline_error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareResult {
    pub rows: Vec<CompareRow>,
    pub oracle: Vec<OracleReport>,
}

pub type ConvolveDoc = Document<ConvolveResult>;
pub type ScanDoc = Document<ScanResult>;
pub type DecomposeDoc = Document<DecomposeResult>;
pub type LinearizeDoc = Document<LinearizeResult>;
pub type EigtestDoc = Document<EigenvalueReport>;
pub type OracleDoc = Document<OracleReport>;
pub type CompareDoc = Document<CompareResult>;
