use serde::Serialize;

/// A Hessian that is diagonal in the frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagonalHessian {
    pub diag: Vec<f64>,
    /// The limit at the zero section was returned.
    pub limit: bool,
}

impl DiagonalHessian {
    pub fn min(&self) -> f64 {
        self.diag.iter().copied().fold(f64::INFINITY, f64::min)
    }
}
