use thiserror::Error;

use twisted_rfh::covering::LiftError;
use twisted_rfh::equivariant::EquivariantError;
use twisted_rfh::orbits::OrbitError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("oracle mismatch: {0}")]
    Mismatch(String),
    #[error("lifting error: {0}")]
    Lifting(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Mismatch(_) => 4,
            CliError::Lifting(_) => 5,
        }
    }

    pub fn config(msg: impl std::fmt::Display) -> Self {
        CliError::Config(msg.to_string())
    }
}

impl From<OrbitError> for CliError {
    fn from(e: OrbitError) -> Self {
        match e {
            OrbitError::EmptyWindow { .. } | OrbitError::DimensionMismatch { .. } => CliError::Config(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<EquivariantError> for CliError {
    fn from(e: EquivariantError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<LiftError> for CliError {
    fn from(e: LiftError) -> Self {
        match e {
            LiftError::Orbit(inner) => inner.into(),
            other => CliError::Lifting(other.to_string()),
        }
    }
}
