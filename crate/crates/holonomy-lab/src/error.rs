use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    /// A parameter outside the family's domain (`n`, `r`, `κ`, space name).
    #[error("invalid parameter: {0}")]
    Domain(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    /// A curvature table whose symmetry closure assigns two values to one slot.
    #[error("inconsistent curvature table at {index:?}: {first} vs {second}")]
    Inconsistent {
        index: [usize; 4],
        first: f64,
        second: f64,
    },
    #[error("plane not graphical (Omega = {omega:.3e})")]
    NotGraphical { omega: f64 },
    #[error("config: {0}")]
    Config(String),
    #[error("flow aborted at t = {t:.4}: {reason}")]
    Flow { t: f64, reason: String },
}

impl LabError {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Domain(_) | LabError::Config(_) => 2,
            LabError::Inconsistent { .. } => 1,
            LabError::Numeric(_) | LabError::NotGraphical { .. } | LabError::Flow { .. } => 3,
        }
    }
}
