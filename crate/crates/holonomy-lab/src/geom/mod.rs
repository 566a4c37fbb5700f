//! Frame-level geometry shared by all families.
//!
//! Everything here works in an orthonormal frame `e_0, …, e_{N-1}` split
//! into a horizontal block `0..n` (tangent to the zero section) and a
//! vertical block `n..n+m`. Conventions:
//!
//! * `R(X,Y,Z,W) = ⟨Rm(Z,W)Y, X⟩` with `Rm(Z,W) = [∇_Z,∇_W] − ∇_[Z,W]`, so
//!   the sectional curvature of an orthonormal pair is `R(X,Y,X,Y)`.
//! * `Ric(X,Y) = Σ_k R(X,e_k,Y,e_k)`; the unit sphere has `Ric = (N−1)g`.
//! * Connection forms follow `∇e_a = ω_a^b ⊗ e_b`, stored as
//!   `Γ[a][b][c] = ω_a^b(e_c)`.

mod connection;
mod forms;
mod frame;
mod hessian;
mod riemann;
mod split;

pub use connection::{increasing_tuples, ConnectionSample};
pub use forms::{det_complex, det_real, Covectors, FormTerm, GradTerm, HessTerm, Wedge};
pub use frame::{ComplexStructure, FrameIndexSet};
pub use hessian::DiagonalHessian;
pub use riemann::{check_riemann_symmetries, ricci_contract, RiemannSample, SymmetryReport};
pub use split::{
    comass_sample, linear_estimates, random_plane, split_plane, LinearEstimates, TangentPlaneSplit,
    GRAPHICAL_MIN,
};
