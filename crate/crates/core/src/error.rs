use serde::Serialize;
use thiserror::Error;

/// Every failure mode the library reports. `kind()` is the stable
/// machine-readable tag used by the CLI error JSON.
#[derive(Debug, Clone, Error, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LabError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("point outside chart domain: {0}")]
    Domain(String),
    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),
    #[error("element is not hyperbolic (|trace| = {trace})")]
    NotHyperbolic { trace: f64 },
    #[error("enumeration incomplete: certified radius {achieved_radius} < requested {requested} at word budget {budget}")]
    IncompleteEnumeration {
        achieved_radius: f64,
        requested: f64,
        budget: usize,
    },
    #[error("degenerate orbit: {0}")]
    DegenerateOrbit(String),
    #[error("flow truncated at t = {t_reached}: {reason}")]
    Truncation { t_reached: f64, reason: String },
    #[error("orbit not closed (defect {defect})")]
    NotClosed { defect: f64 },
    #[error("precondition violated: {what} (measured {measured})")]
    Precondition { what: String, measured: f64 },
    #[error("field is not unimodular (max ||u|-1| = {deviation})")]
    NonUnimodular { deviation: f64 },
    #[error("dimension or kind mismatch: {0}")]
    Mismatch(String),
    #[error("resonance: {0}")]
    Resonance(String),
    #[error("structure violation: residual {residual} above tolerance {tol}")]
    StructureViolation { residual: f64, tol: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("convergence failure: {0}")]
    Convergence(String),
}

impl LabError {
    pub fn kind(&self) -> &'static str {
        match self {
            LabError::InvalidArgument(_) => "invalid_argument",
            LabError::Domain(_) => "domain",
            LabError::NumericalDegeneracy(_) => "numerical_degeneracy",
            LabError::NotHyperbolic { .. } => "not_hyperbolic",
            LabError::IncompleteEnumeration { .. } => "incomplete_enumeration",
            LabError::DegenerateOrbit(_) => "degenerate_orbit",
            LabError::Truncation { .. } => "truncation",
            LabError::NotClosed { .. } => "not_closed",
            LabError::Precondition { .. } => "precondition",
            LabError::NonUnimodular { .. } => "non_unimodular",
            LabError::Mismatch(_) => "mismatch",
            LabError::Resonance(_) => "resonance",
            LabError::StructureViolation { .. } => "structure_violation",
            LabError::InsufficientData(_) => "insufficient_data",
            LabError::Convergence(_) => "convergence",
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
