//! Experiment plans, scenario runners, and file output.

pub mod config;
pub mod envelope;
pub mod runner;
pub mod scan;

use crate::diagnostics::DiagnosticsError;
use crate::dynamics::DynamicsError;
use crate::ensemble::EnsembleError;
use crate::entanglement::EntanglementError;
use crate::fock::FockError;
use crate::model::ModelError;
use crate::operators::OperatorError;
use thiserror::Error;

/// Exit code for configuration problems.
pub const EXIT_CONFIG: i32 = 2;
/// Exit code for violated numerical invariants.
pub const EXIT_NUMERICAL: i32 = 3;
/// Exit code for file-system failures.
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical invariant violated: {0}")]
    Numerical(String),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

impl ExperimentError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => EXIT_CONFIG,
            ExperimentError::Numerical(_) => EXIT_NUMERICAL,
            ExperimentError::Io(_) => EXIT_IO,
        }
    }
}

impl From<ModelError> for ExperimentError {
    fn from(e: ModelError) -> Self {
        ExperimentError::Config(e.to_string())
    }
}

impl From<FockError> for ExperimentError {
    fn from(e: FockError) -> Self {
        ExperimentError::Config(e.to_string())
    }
}

impl From<OperatorError> for ExperimentError {
    fn from(e: OperatorError) -> Self {
        ExperimentError::Config(e.to_string())
    }
}

impl From<EntanglementError> for ExperimentError {
    fn from(e: EntanglementError) -> Self {
        match e {
            EntanglementError::TraceDeviation(_) => ExperimentError::Numerical(e.to_string()),
            other => ExperimentError::Config(other.to_string()),
        }
    }
}

impl From<DiagnosticsError> for ExperimentError {
    fn from(e: DiagnosticsError) -> Self {
        match e {
            DiagnosticsError::ComplexCurrent(_) => ExperimentError::Numerical(e.to_string()),
            DiagnosticsError::Entanglement(inner) => inner.into(),
            other => ExperimentError::Config(other.to_string()),
        }
    }
}

impl From<DynamicsError> for ExperimentError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::NotHermitian(_)
            | DynamicsError::NonUnitaryOperator(_)
            | DynamicsError::InvariantViolation(_) => ExperimentError::Numerical(e.to_string()),
            DynamicsError::Diagnostics(inner) => inner.into(),
            other => ExperimentError::Config(other.to_string()),
        }
    }
}

impl From<EnsembleError> for ExperimentError {
    fn from(e: EnsembleError) -> Self {
        match e {
            EnsembleError::Entanglement(inner) => inner.into(),
            other => ExperimentError::Config(other.to_string()),
        }
    }
}
