//! Failure classes and their exit codes.

use serde::Serialize;

#[derive(Debug)]
pub enum CliError {
    /// Bad input files, flags or configuration. Exit 2.
    Schema(String),
    /// A solver or limit did not settle. Exit 3, with a diagnostic JSON.
    NoConvergence { message: String, iterations: Option<usize>, residual: Option<f64> },
    /// An internal invariant failed. Exit 4.
    Invariant(String),
    /// Reading or writing artifacts failed. Exit 1.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Schema(_) => 2,
            CliError::NoConvergence { .. } => 3,
            CliError::Invariant(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io(_) => "io",
            CliError::Schema(_) => "schema",
            CliError::NoConvergence { .. } => "no-convergence",
            CliError::Invariant(_) => "invariant",
        }
    }

    pub fn diagnostic(&self) -> Diagnostic {
        let (iterations, residual) = match self {
            CliError::NoConvergence { iterations, residual, .. } => (*iterations, *residual),
            _ => (None, None),
        };
        Diagnostic { error: self.kind().to_string(), message: self.to_string(), iterations, residual }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Schema(m) | CliError::Invariant(m) | CliError::Io(m) => f.write_str(m),
            CliError::NoConvergence { message, .. } => f.write_str(message),
        }
    }
}

impl std::error::Error for CliError {}

/// What gets written when a run fails numerically.
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct Diagnostic {
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
}

impl From<freeatoms::Error> for CliError {
    fn from(e: freeatoms::Error) -> Self {
        use freeatoms::Error as E;
        let message = e.to_string();
        match e {
            E::NoConvergence { iterations, residual } => {
                CliError::NoConvergence { message, iterations: Some(iterations), residual: Some(residual) }
            }
            E::Extrapolation { spread } => CliError::NoConvergence { message, iterations: None, residual: Some(spread) },
            E::Quadrature(_) => CliError::NoConvergence { message, iterations: None, residual: None },
            E::InvalidMeasure(_)
            | E::NotInUpperHalfPlane { .. }
            | E::DimensionMismatch(_)
            | E::Parse { .. }
            | E::InvalidPolynomial(_)
            | E::Precondition(_) => CliError::Schema(message),
            E::Singular(_) | E::GenericRank(_) | E::LinAlg(_) => CliError::Invariant(message),
        }
    }
}
