//! Fixtures shared by the criterion benches under `benches/`.

use freeatoms::linalg::{diag_real, identity};
use freeatoms::{CMat, FreeSumModel, NCPoly, SpectralMeasure};

/// Symmetric Bernoulli measure `½δ₋₁ + ½δ₁`.
pub fn bernoulli() -> SpectralMeasure {
    SpectralMeasure::atomic(&[(-1.0, 0.5), (1.0, 0.5)]).expect("valid measure")
}

/// Projection of trace `t`.
pub fn projection(t: f64) -> SpectralMeasure {
    SpectralMeasure::atomic(&[(0.0, 1.0 - t), (1.0, t)]).expect("valid measure")
}

/// Scalar model of a Bernoulli plus a semicircle.
pub fn scalar_model() -> FreeSumModel {
    FreeSumModel::scalar(bernoulli(), SpectralMeasure::semicircle(0.0, 2.0).expect("valid measure"))
}

/// A 3×3 diagonal-coefficient model of two projections with a kernel at `b = I`.
pub fn matrix_model() -> (FreeSumModel, CMat) {
    let a1 = diag_real(&[1.0, 0.0, 1.0]);
    let a2 = diag_real(&[0.0, 1.0, 1.0]);
    let model = FreeSumModel::new(a1, a2, projection(0.3), projection(0.6)).expect("valid model");
    (model, identity(3))
}

/// The anticommutator `Z1 Z2 + Z2 Z1`.
pub fn anticommutator() -> NCPoly {
    NCPoly::parse("Z1*Z2 + Z2*Z1").expect("valid polynomial")
}
