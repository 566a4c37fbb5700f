//! Numerics for complete Ricci-flat metrics of cohomogeneity one and the
//! calibrated zero sections they contain.
//!
//! The crate covers three families: Stenzel metrics on `T*S^n`, Calabi
//! hyperkähler metrics on `T*CP^n`, and the Bryant-Salamon `G_2` and
//! `Spin(7)` metrics on vector bundles over `S^3`, `S^4` and `CP^2`.
//! Each family exposes closed-form curvature, the Hessian of the squared
//! distance to the zero section and both derivatives of the calibration
//! form. An independent finite-difference [`oracle`] recomputes the same
//! quantities from explicit coordinate metrics, and [`mcf`] runs mean
//! curvature flow of perturbed zero spheres in the `n = 2` Stenzel metric.

pub mod bryant_salamon;
pub mod calabi;
pub mod config;
pub mod error;
pub mod geom;
pub mod mcf;
pub mod oracle;
pub mod quad;
pub mod stenzel;
pub mod suite;

pub use error::LabError;

pub type Result<T> = std::result::Result<T, LabError>;
