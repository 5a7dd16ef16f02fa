//! Atoms of operator-valued free additive convolutions and of selfadjoint
//! polynomials in two free variables.
//!
//! The pipeline: spectral measures ([`measure`]) feed matrix-valued Cauchy
//! transforms ([`opval`]), which the subordination solver ([`subord`])
//! combines into the transform of `a₁ ⊗ X₁ + a₂ ⊗ X₂`. Boundary limits of that
//! transform give kernel masses and their decomposition ([`atoms`]).
//! Polynomials ([`ncpoly`]) reach the same machinery through selfadjoint
//! linearization ([`linearize`]). [`rmt`] is an independent random-matrix
//! oracle for all of it.

pub mod atoms;
pub mod error;
pub mod linalg;
pub mod linearize;
pub mod measure;
pub mod ncpoly;
pub mod opval;
pub mod rmt;
pub mod subord;

pub use atoms::{AtomReport, BoundaryLimit, CompressionPair, EigenvalueReport, Extrapolation, LadderOptions};
pub use error::{Error, Result};
pub use linalg::{c64, CMat};
pub use linearize::{LinearPencil, LinearizationCertificate};
pub use measure::{Atom, Density, SpectralMeasure};
pub use ncpoly::{Letter, NCPoly, PolyMatrix, Word};
pub use opval::HalfPlanePoint;
pub use rmt::{EnsembleSpec, OracleOptions, OracleReport, OracleTarget};
pub use subord::{FreeSumModel, SolverOptions, SubordinationResult};

/// Sizes the global worker pool used by [`atoms::atom_scan`] and the oracle.
/// Must run before any parallel work; `0` keeps rayon's default.
pub fn set_workers(n: usize) -> Result<()> {
    if n == 0 {
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Precondition(format!("worker pool: {e}")))
}
