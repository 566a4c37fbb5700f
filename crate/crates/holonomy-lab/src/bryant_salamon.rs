//! The four Bryant-Salamon metrics on vector bundles over `S³`, `S⁴` and
//! `CP²`.
//!
//! Everything is evaluated on the fiber over a point `p` of the base where the
//! base connection forms `ω̄` and the bundle connection `A` vanish. A fiber
//! point is a vector `y ∈ ℝ^m` with `s = |y|²`.
//!
//! Frame indices are 0-based: `0..n` horizontal, `n..n+m` vertical.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::geom::{ConnectionSample, Covectors, FrameIndexSet, GradTerm, HessTerm, RiemannSample, Wedge};
use crate::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
pub enum BSSpaceId {
    /// Spinor bundle of `S³`.
    #[serde(rename = "spinor_S3")]
    SpinorS3,
    /// Anti-self-dual 2-forms on `S⁴`.
    #[serde(rename = "asd_S4")]
    AsdS4,
    /// Anti-self-dual 2-forms on `CP²`.
    #[serde(rename = "asd_CP2")]
    AsdCP2,
    /// Negative spinor bundle of `S⁴`.
    #[serde(rename = "neg_spinor_S4")]
    NegSpinorS4,
}

impl BSSpaceId {
    pub const ALL: [BSSpaceId; 4] = [Self::SpinorS3, Self::AsdS4, Self::AsdCP2, Self::NegSpinorS4];

    pub fn name(self) -> &'static str {
        match self {
            Self::SpinorS3 => "spinor_S3",
            Self::AsdS4 => "asd_S4",
            Self::AsdCP2 => "asd_CP2",
            Self::NegSpinorS4 => "neg_spinor_S4",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| LabError::Config(format!("unknown Bryant-Salamon space {s:?}")))
    }
}

/// One space together with its curvature scale `κ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BSSpace {
    pub id: BSSpaceId,
    pub n: usize,
    pub m: usize,
    pub kappa: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub alpha0: f64,
    pub beta0: f64,
    /// `α = α₀(1+s)^p`, `β = β₀(1+s)^q`.
    pub alpha_exp: f64,
    pub beta_exp: f64,
}

/// `α, β` and their `s`-derivatives at one value of `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BSRadialState {
    pub s: f64,
    pub alpha: f64,
    pub beta: f64,
    pub dalpha: f64,
    pub dbeta: f64,
    pub ddalpha: f64,
    pub ddbeta: f64,
}

/// Residuals of the first-order system and its two consequences.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RelationReport {
    pub ode_alpha: f64,
    pub ode_beta: f64,
    pub ratio_identity: f64,
    pub beta_over_alpha2_fd: f64,
    /// `min α′` and `min (β − 2s|β′|)` on the positive part of the grid.
    pub min_dalpha: f64,
    pub min_beta_margin: f64,
}

impl RelationReport {
    pub fn hessian_condition_holds(&self) -> bool {
        self.min_dalpha > 0.0 && self.min_beta_margin > 0.0
    }
}

/// Constant coefficients `F^μ_{ν ij}` of the bundle curvature
/// `F^μ_ν = ½ F^μ_{ν ij} ω̄^i ∧ ω̄^j`, stored as `f[μ][ν][i][j]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FMatrix {
    pub n: usize,
    pub m: usize,
    data: Vec<f64>,
}

impl FMatrix {
    fn zeros(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            data: vec![0.0; m * m * n * n],
        }
    }

    #[inline]
    fn idx(&self, mu: usize, nu: usize, i: usize, j: usize) -> usize {
        ((mu * self.m + nu) * self.n + i) * self.n + j
    }

    #[inline]
    pub fn get(&self, mu: usize, nu: usize, i: usize, j: usize) -> f64 {
        self.data[self.idx(mu, nu, i, j)]
    }

    /// Overwrites one coefficient, leaving its mirror images untouched.
    pub fn set_raw(&mut self, mu: usize, nu: usize, i: usize, j: usize, v: f64) {
        let k = self.idx(mu, nu, i, j);
        self.data[k] = v;
    }

    /// Adds `c ω̄^i ∧ ω̄^j` to the 2-form `F^μ_ν`.
    fn add_2form(&mut self, mu: usize, nu: usize, i: usize, j: usize, c: f64) {
        let a = self.idx(mu, nu, i, j);
        let b = self.idx(mu, nu, j, i);
        self.data[a] += c;
        self.data[b] -= c;
    }

    /// Largest violation of the skew-symmetries in `(μ,ν)` and `(i,j)`.
    pub fn skew_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for mu in 0..self.m {
            for nu in 0..self.m {
                for i in 0..self.n {
                    for j in 0..self.n {
                        let v = self.get(mu, nu, i, j);
                        d = d.max((v + self.get(nu, mu, i, j)).abs());
                        d = d.max((v + self.get(mu, nu, j, i)).abs());
                    }
                }
            }
        }
        d
    }

    /// `Σ_ν F^μ_{ν ij} y^ν`.
    pub fn contract_y(&self, y: &[f64], mu: usize, i: usize, j: usize) -> f64 {
        (0..self.m).map(|nu| self.get(mu, nu, i, j) * y[nu]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// A 2-form entry of an `F` table in 1-based base indices: `c ω̄^a ∧ ω̄^b`.
type Entry = &'static [(i8, u8, u8)];

// rows are the upper index, columns the lower one; the overall scale is applied later
const SPINOR_S3: [[Entry; 4]; 4] = [
    [&[], &[(-1, 2, 3)], &[(1, 1, 3)], &[(-1, 1, 2)]],
    [&[(1, 2, 3)], &[], &[(1, 1, 2)], &[(1, 1, 3)]],
    [&[(-1, 1, 3)], &[(-1, 1, 2)], &[], &[(1, 2, 3)]],
    [&[(1, 1, 2)], &[(-1, 1, 3)], &[(-1, 2, 3)], &[]],
];

const ASD: [[Entry; 3]; 3] = [
    [&[], &[(-1, 1, 4), (1, 2, 3)], &[(1, 1, 3), (1, 2, 4)]],
    [&[(1, 1, 4), (-1, 2, 3)], &[], &[(-1, 1, 2), (1, 3, 4)]],
    [&[(-1, 1, 3), (-1, 2, 4)], &[(1, 1, 2), (-1, 3, 4)], &[]],
];

const NEG_SPINOR_S4: [[Entry; 4]; 4] = [
    [&[], &[(1, 1, 2), (-1, 3, 4)], &[(1, 1, 3), (1, 2, 4)], &[(1, 1, 4), (-1, 2, 3)]],
    [&[(-1, 1, 2), (1, 3, 4)], &[], &[(-1, 1, 4), (1, 2, 3)], &[(1, 1, 3), (1, 2, 4)]],
    [&[(-1, 1, 3), (-1, 2, 4)], &[(1, 1, 4), (-1, 2, 3)], &[], &[(-1, 1, 2), (1, 3, 4)]],
    [&[(-1, 1, 4), (1, 2, 3)], &[(-1, 1, 3), (-1, 2, 4)], &[(1, 1, 2), (-1, 3, 4)], &[]],
];

/// Two coefficients of `∇²Ω`, exposed so that alternative values can be
/// compared against the connection engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HessCoefficients {
    /// Multiplies `(F^μ_{νjk} y^ν)(F^σ_{γik} y^γ) ω^{n+σ} ⊗ ω^i`, with a minus sign.
    pub ff: f64,
    /// Multiplies `y^μ F^γ_{νkj} y^ν ω^{n+γ} ⊗ ω^k`.
    pub yf: f64,
}

/// Hessian of `s` in the frame, with the lower bound it is compared against.
#[derive(Debug, Clone, Serialize)]
pub struct HessianS {
    pub matrix: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    /// `min(4κ₁s/α², 2/β² − 4κ₂s/α²)`: the smallest eigenvalue outside the
    /// `y` direction.
    pub bound: f64,
    /// The horizontal bound with `β/α³` in place of `1/α²`.
    pub bound_beta_alpha3: f64,
}

impl HessianS {
    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

impl BSSpace {
    pub fn new(id: BSSpaceId, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(LabError::Domain(format!("κ must be positive, got {kappa}")));
        }
        let k = kappa;
        let (n, m, kappa1, kappa2, alpha0, beta0, alpha_exp, beta_exp) = match id {
            BSSpaceId::SpinorS3 => (3, 4, k / 4.0, k / 8.0, (3.0 * k).sqrt(), 2.0, 1.0 / 3.0, -1.0 / 6.0),
            BSSpaceId::AsdS4 | BSSpaceId::AsdCP2 => (4, 3, k / 2.0, k / 2.0, (2.0 * k).sqrt(), 1.0, 0.25, -0.25),
            BSSpaceId::NegSpinorS4 => (4, 4, 3.0 * k / 8.0, k / 4.0, (5.0 * k).sqrt(), 2.0, 0.3, -0.2),
        };
        Ok(Self {
            id,
            n,
            m,
            kappa,
            kappa1,
            kappa2,
            alpha0,
            beta0,
            alpha_exp,
            beta_exp,
        })
    }

    pub fn frame(&self) -> FrameIndexSet {
        FrameIndexSet::new(self.n, self.m).expect("fixed dimensions")
    }

    pub fn alpha_beta(&self, s: f64) -> Result<BSRadialState> {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(LabError::Domain(format!("s must be ≥ 0, got {s}")));
        }
        let (p, q) = (self.alpha_exp, self.beta_exp);
        let t = 1.0 + s;
        let alpha = self.alpha0 * t.powf(p);
        let beta = self.beta0 * t.powf(q);
        Ok(BSRadialState {
            s,
            alpha,
            beta,
            dalpha: p * alpha / t,
            dbeta: q * beta / t,
            ddalpha: p * (p - 1.0) * alpha / (t * t),
            ddbeta: q * (q - 1.0) * beta / (t * t),
        })
    }

    /// State at the fiber point `y`.
    pub fn state_at(&self, y: &[f64]) -> Result<BSRadialState> {
        self.check_fiber(y)?;
        self.alpha_beta(y.iter().map(|v| v * v).sum())
    }

    fn check_fiber(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.m {
            return Err(LabError::Domain(format!("fiber vector needs {} entries, got {}", self.m, y.len())));
        }
        Ok(())
    }

    /// Residuals over a grid of `s`; the derivative of `β/α²` is taken by
    /// central differences with step `h_fd`.
    pub fn relation_checks(&self, grid: &[f64], h_fd: f64) -> Result<RelationReport> {
        let mut rep = RelationReport {
            ode_alpha: 0.0,
            ode_beta: 0.0,
            ratio_identity: 0.0,
            beta_over_alpha2_fd: 0.0,
            min_dalpha: f64::INFINITY,
            min_beta_margin: f64::INFINITY,
        };
        let (k1, k2) = (self.kappa1, self.kappa2);
        let r0 = (self.alpha0 / self.beta0).powi(2);
        for &s in grid {
            let st = self.alpha_beta(s)?;
            let (a, b) = (st.alpha, st.beta);
            let sa = st.dalpha.abs().max(k1 * b * b / a);
            rep.ode_alpha = rep.ode_alpha.max((st.dalpha - k1 * b * b / a).abs() / sa);
            let sb = st.dbeta.abs().max(k2 * b.powi(3) / (a * a));
            rep.ode_beta = rep.ode_beta.max((st.dbeta + k2 * b.powi(3) / (a * a)).abs() / sb);
            let lhs = (a / b).powi(2);
            let rhs = r0 + 2.0 * (k1 + k2) * s;
            rep.ratio_identity = rep.ratio_identity.max((lhs - rhs).abs() / rhs);

            let h = h_fd.min(s.max(h_fd)).max(1e-12);
            let (lo, hi) = if s >= h { (s - h, s + h) } else { (s, s + 2.0 * h) };
            let g = |t: f64| -> Result<f64> {
                let st = self.alpha_beta(t)?;
                Ok(st.beta / (st.alpha * st.alpha))
            };
            let fd = if s >= h {
                (g(hi)? - g(lo)?) / (2.0 * h)
            } else {
                (-3.0 * g(s)? + 4.0 * g(s + h)? - g(s + 2.0 * h)?) / (2.0 * h)
            };
            let exact = -(2.0 * k1 + k2) * b.powi(3) / a.powi(4);
            rep.beta_over_alpha2_fd = rep.beta_over_alpha2_fd.max((fd - exact).abs() / exact.abs());

            if s > 0.0 {
                rep.min_dalpha = rep.min_dalpha.min(st.dalpha);
                rep.min_beta_margin = rep.min_beta_margin.min(b - 2.0 * s * st.dbeta.abs());
            }
        }
        Ok(rep)
    }

    pub fn f_matrix(&self) -> FMatrix {
        let (n, m) = (self.n, self.m);
        let mut f = FMatrix::zeros(n, m);
        let k = self.kappa;
        let mut fill = |rows: &[&[Entry]], scale: f64| {
            for (mu, row) in rows.iter().enumerate() {
                for (nu, entry) in row.iter().enumerate() {
                    for &(c, a, b) in entry.iter() {
                        f.add_2form(mu, nu, a as usize - 1, b as usize - 1, scale * c as f64);
                    }
                }
            }
        };
        match self.id {
            BSSpaceId::SpinorS3 => fill(&SPINOR_S3.iter().map(|r| r.as_slice()).collect::<Vec<_>>(), k / 2.0),
            BSSpaceId::AsdS4 | BSSpaceId::AsdCP2 => fill(&ASD.iter().map(|r| r.as_slice()).collect::<Vec<_>>(), k),
            BSSpaceId::NegSpinorS4 => fill(&NEG_SPINOR_S4.iter().map(|r| r.as_slice()).collect::<Vec<_>>(), k / 2.0),
        }
        f
    }

    /// The base curvature `R̄_{jikl}` in the base frame at `p`.
    pub fn base_curvature(&self) -> RiemannSample {
        let k = self.kappa;
        match self.id {
            BSSpaceId::AsdCP2 => {
                // Fubini-Study with holomorphic sectional curvature 2κ and
                // J e_0 = e_1, J e_2 = e_3
                let jm = |a: usize, b: usize| -> f64 {
                    // ⟨e_a, J e_b⟩
                    match (a, b) {
                        (1, 0) | (3, 2) => 1.0,
                        (0, 1) | (2, 3) => -1.0,
                        _ => 0.0,
                    }
                };
                let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                RiemannSample::from_fn(4, |x, y, z, w| {
                    0.5 * k
                        * (d(x, z) * d(y, w) - d(x, w) * d(y, z) + jm(x, z) * jm(y, w) - jm(x, w) * jm(y, z)
                            + 2.0 * jm(x, y) * jm(z, w))
                })
            }
            _ => space_form(self.n, k),
        }
    }

    /// The endomorphism `σ(W)` of the fiber induced by a base rotation `W`
    /// (`W[(i, j)] = ω̄_j^i(X)`), read off from the `F` table.
    pub fn fiber_action(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        let f = self.f_matrix();
        let (n, m) = (self.n, self.m);
        DMatrix::from_fn(m, m, |mu, nu| {
            let mut acc = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    acc += w[(i, j)] * f.get(mu, nu, i, j);
                }
            }
            acc / self.kappa
        })
    }

    /// `max |(∇_A F)^μ_{ν jk}|` at the geodesic point, where `dF`, `A` and
    /// `ω̄` all vanish.
    pub fn nabla_af_residual(&self) -> f64 {
        let zero = DMatrix::zeros(self.n, self.n);
        self.nabla_af_residual_with(&self.f_matrix(), &zero)
    }

    /// `(∇_A F)(X)` for a frame rotated away from the geodesic one:
    /// `ω̄_j^i(X) = W[(i, j)]`, `A(X) = σ(W)`, `dF = 0`. Vanishes for the
    /// tables of [`BSSpace::f_matrix`] and any `W` in the base holonomy
    /// algebra; a perturbed `f` leaves a residual linear in the perturbation.
    pub fn nabla_af_residual_with(&self, f: &FMatrix, w: &DMatrix<f64>) -> f64 {
        let (n, m) = (self.n, self.m);
        let a = self.fiber_action(w);
        let mut worst: f64 = 0.0;
        for mu in 0..m {
            for nu in 0..m {
                for j in 0..n {
                    for k in 0..n {
                        let mut v = 0.0;
                        for g in 0..m {
                            v += a[(mu, g)] * f.get(g, nu, j, k) - f.get(mu, g, j, k) * a[(g, nu)];
                        }
                        for i in 0..n {
                            v -= f.get(mu, nu, i, k) * w[(i, j)] + f.get(mu, nu, j, i) * w[(i, k)];
                        }
                        worst = worst.max(v.abs());
                    }
                }
            }
        }
        worst
    }

    /// `β/(2α²)` and `2α′/(αβ)`: the two coefficients of `ω_i^{n+μ}`.
    fn mixed_coeffs(st: &BSRadialState) -> (f64, f64) {
        (st.beta / (2.0 * st.alpha * st.alpha), 2.0 * st.dalpha / (st.alpha * st.beta))
    }

    /// `s`-derivatives of the two coefficients of [`Self::mixed_coeffs`].
    fn mixed_coeffs_dot(st: &BSRadialState) -> (f64, f64) {
        let (a, b, da, db, dda) = (st.alpha, st.beta, st.dalpha, st.dbeta, st.ddalpha);
        let u = db / (2.0 * a * a) - b * da / a.powi(3);
        let v = 2.0 * dda / (a * b) - 2.0 * da * (da * b + a * db) / (a * b).powi(2);
        (u, v)
    }

    /// Components `a[μ][i][c] = ω_i^{n+μ}(e_c)`.
    fn mixed_table(&self, st: &BSRadialState, f: &FMatrix, y: &[f64]) -> Vec<Vec<Vec<f64>>> {
        let (n, m) = (self.n, self.m);
        let (u, v) = Self::mixed_coeffs(st);
        let mut out = vec![vec![vec![0.0; n + m]; n]; m];
        for mu in 0..m {
            for i in 0..n {
                for j in 0..n {
                    out[mu][i][j] = u * f.contract_y(y, mu, i, j);
                }
                out[mu][i][i] -= v * y[mu];
            }
        }
        out
    }

    /// Connection coefficients at the fiber point `y` over `p`. Only the
    /// mixed block carries derivatives; they are taken along the vertical
    /// directions, the horizontal ones vanishing at `p`.
    pub fn connection_sample(&self, y: &[f64]) -> Result<ConnectionSample> {
        let st = self.state_at(y)?;
        let (n, m) = (self.n, self.m);
        let f = self.f_matrix();
        let (u, _) = Self::mixed_coeffs(&st);
        let (du, dv) = Self::mixed_coeffs_dot(&st);
        let (_, v) = Self::mixed_coeffs(&st);
        let w = 2.0 * st.dbeta / (st.beta * st.beta);
        let b = st.beta;
        let mut g = ConnectionSample::new(self.frame());
        let mixed = self.mixed_table(&st, &f, y);
        for i in 0..n {
            for j in (i + 1)..n {
                for mu in 0..m {
                    g.add(i, j, n + mu, u * f.contract_y(y, mu, i, j));
                }
            }
        }
        for mu in 0..m {
            for i in 0..n {
                for c in 0..n {
                    g.add(i, n + mu, c, mixed[mu][i][c]);
                }
            }
        }
        for nu in 0..m {
            for mu in (nu + 1)..m {
                // ω_{n+ν}^{n+μ} = w (y^ν ω^{n+μ} − y^μ ω^{n+ν})
                g.add(n + nu, n + mu, n + mu, w * y[nu]);
                g.add(n + nu, n + mu, n + nu, -w * y[mu]);
            }
        }
        // e_{n+γ} = β⁻¹ ∂/∂y^γ and ∂s/∂y^γ = 2y^γ
        for mu in 0..m {
            for i in 0..n {
                for j in 0..n {
                    let fy = f.contract_y(y, mu, i, j);
                    for gam in 0..m {
                        let mut d = 2.0 * y[gam] * du * fy + u * f.get(mu, gam, i, j);
                        if i == j {
                            d -= 2.0 * y[gam] * dv * y[mu];
                            if gam == mu {
                                d -= v;
                            }
                        }
                        g.add_derivative(i, n + mu, j, n + gam, d / b);
                    }
                }
            }
        }
        Ok(g)
    }

    /// The full curvature tensor at `y`, assembled from the four families of
    /// components and completed by symmetry.
    pub fn curvature(&self, y: &[f64]) -> Result<RiemannSample> {
        let st = self.state_at(y)?;
        let (n, m) = (self.n, self.m);
        let f = self.f_matrix();
        let rb = self.base_curvature();
        let (a, b, s) = (st.alpha, st.beta, st.s);
        let (k1, k2) = (self.kappa1, self.kappa2);
        let a2 = a * a;
        let c4 = b * b / (a2 * a2);
        let d = |x: usize, z: usize| if x == z { 1.0 } else { 0.0 };
        // fy[μ][i][j] = F^μ_{ν ij} y^ν
        let fy: Vec<Vec<Vec<f64>>> = (0..m)
            .map(|mu| (0..n).map(|i| (0..n).map(|j| f.contract_y(y, mu, i, j)).collect()).collect())
            .collect();
        // yF·Fy: Σ_μ y^ν F^ν_{μ ij} F^μ_{γ kl} y^γ = −Σ_μ fy[μ][ij] fy[μ][kl]
        let ffy = |i: usize, j: usize, k: usize, l: usize| -> f64 {
            -(0..m).map(|mu| fy[mu][i][j] * fy[mu][k][l]).sum::<f64>()
        };
        let mut entries: Vec<([usize; 4], f64)> = Vec::new();
        for j in 0..n {
            for i in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let v = rb.get(j, i, k, l) / a2
                            - 4.0 * c4 * k1 * k1 * s * (d(j, k) * d(i, l) - d(j, l) * d(i, k))
                            - 0.25 * c4 * (2.0 * ffy(i, j, k, l) + ffy(i, k, j, l) - ffy(i, l, j, k));
                        entries.push(([j, i, k, l], v));
                    }
                }
            }
        }
        for j in 0..n {
            for i in 0..n {
                for mu in 0..m {
                    for nu in 0..m {
                        let mut v = -f.get(mu, nu, i, j) / a2
                            + 2.0 * c4 * (k1 + k2) * (y[nu] * fy[mu][i][j] - y[mu] * fy[nu][i][j]);
                        for k in 0..n {
                            v += 0.25 * c4 * (fy[mu][i][k] * fy[nu][j][k] - fy[nu][i][k] * fy[mu][j][k]);
                        }
                        entries.push(([j, i, n + mu, n + nu], v));
                    }
                }
            }
        }
        for mu in 0..m {
            for i in 0..n {
                for nu in 0..m {
                    for j in 0..n {
                        let mut v = -(2.0 * k1 / a2 - 4.0 * c4 * k1 * k2 * s) * d(mu, nu) * d(i, j)
                            + f.get(mu, nu, i, j) / (2.0 * a2)
                            + 4.0 * c4 * k1 * k1 * y[mu] * y[nu] * d(i, j)
                            + c4 * (k1 + k2) * (y[mu] * fy[nu][i][j] - y[nu] * fy[mu][i][j]);
                        for k in 0..n {
                            v += 0.25 * c4 * fy[nu][i][k] * fy[mu][j][k];
                        }
                        entries.push(([n + mu, i, n + nu, j], v));
                    }
                }
            }
        }
        for mu in 0..m {
            for nu in 0..m {
                for g in 0..m {
                    for e in 0..m {
                        let v = (4.0 * k2 / a2 - 4.0 * c4 * k2 * k2 * s) * (d(mu, g) * d(nu, e) - d(mu, e) * d(nu, g))
                            + 4.0
                                * c4
                                * k2
                                * (2.0 * k1 + k2)
                                * (y[nu] * y[g] * d(mu, e) - y[nu] * y[e] * d(mu, g) + y[mu] * y[e] * d(nu, g)
                                    - y[mu] * y[g] * d(e, nu));
                        entries.push(([n + mu, n + nu, n + g, n + e], v));
                    }
                }
            }
        }
        let scale = entries.iter().fold(1.0_f64, |acc, (_, v)| acc.max(v.abs()));
        RiemannSample::from_table(n + m, &entries, None, 1e-12 * scale)
    }

    /// Largest component of type `R(H,V,V,V)` or `R(V,H,H,H)` (and their
    /// permutations): components with an odd number of vertical slots.
    pub fn odd_type_max(&self, r: &RiemannSample) -> f64 {
        let d = self.n + self.m;
        let mut worst: f64 = 0.0;
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    for e in 0..d {
                        let nv = [a, b, c, e].iter().filter(|&&x| x >= self.n).count();
                        if nv % 2 == 1 {
                            worst = worst.max(r.get(a, b, c, e).abs());
                        }
                    }
                }
            }
        }
        worst
    }

    /// Hessian of `s` at the fiber point `y` for this space.
    pub fn hessian_s(&self, y: &[f64]) -> Result<HessianS> {
        let st = self.state_at(y)?;
        Ok(self.hessian_s_from(&st, y))
    }

    /// Hessian of `s` for arbitrary coefficient data, so that profiles other
    /// than the Ricci-flat one can be tested. `st.s` must equal `|y|²`.
    pub fn hessian_s_from(&self, st: &BSRadialState, y: &[f64]) -> HessianS {
        let (n, m) = (self.n, self.m);
        let (a, b, da, db, s) = (st.alpha, st.beta, st.dalpha, st.dbeta, st.s);
        let mut h = DMatrix::<f64>::zeros(n + m, n + m);
        let hor = 4.0 * da * s / (a * b * b);
        for i in 0..n {
            h[(i, i)] = hor;
        }
        // (4/β²)′ = −8β′/β³
        let dd = -8.0 * db / b.powi(3);
        for mu in 0..m {
            for nu in 0..m {
                let mut v = dd * y[mu] * y[nu];
                if mu == nu {
                    v += 2.0 / (b * b) + 4.0 * db * s / b.powi(3);
                }
                h[(n + mu, n + nu)] = v;
            }
        }
        let mut eig: Vec<f64> = h.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        eig.sort_by(|x, z| x.total_cmp(z));
        let k1 = self.kappa1;
        let vert = 2.0 / (b * b) - 4.0 * self.kappa2 * s / (a * a);
        HessianS {
            matrix: (0..n + m).map(|r| (0..n + m).map(|c| h[(r, c)]).collect()).collect(),
            eigenvalues: eig,
            bound: (4.0 * k1 * s / (a * a)).min(vert),
            bound_beta_alpha3: (4.0 * k1 * b * s / a.powi(3)).min(vert),
        }
    }

    /// `−Σ_{μ,i} ω_i^{n+μ} ⊗ ω_i^{n+μ}` as a matrix in the frame.
    pub fn hess_first_block(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        let st = self.state_at(y)?;
        let d = self.n + self.m;
        let t = self.mixed_table(&st, &self.f_matrix(), y);
        let mut out = DMatrix::zeros(d, d);
        for row in &t {
            for a in row {
                for c in 0..d {
                    for e in 0..d {
                        out[(c, e)] -= a[c] * a[e];
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn covectors(&self) -> Covectors {
        Covectors::real_coframe(self.n + self.m)
    }

    fn omega(&self) -> Wedge {
        Wedge::new((0..self.n).collect())
    }

    /// `∇Ω = ω_j^{n+μ} ⊗ (ω^{n+μ} ∧ Ω^j)` with `Ω^j = ι(e_j)Ω`.
    pub fn grad_omega_terms(&self, y: &[f64]) -> Result<Vec<GradTerm>> {
        let st = self.state_at(y)?;
        let (n, m) = (self.n, self.m);
        let t = self.mixed_table(&st, &self.f_matrix(), y);
        let omega = self.omega();
        let mut out = Vec::new();
        for mu in 0..m {
            for j in 0..n {
                let form = omega.interior(j).expect("j < n").prepend(n + mu);
                for (c, &v) in t[mu][j].iter().enumerate() {
                    if v != 0.0 {
                        out.push(GradTerm {
                            coeff: Complex64::new(v, 0.0),
                            dir: c,
                            form: form.clone(),
                        });
                    }
                }
            }
        }
        Ok(out)
    }

    /// The derived coefficients of the two `F`-quadratic and `yF` terms.
    pub fn hess_coefficients(st: &BSRadialState) -> HessCoefficients {
        let a = st.alpha;
        HessCoefficients {
            ff: st.beta * st.beta / (4.0 * a.powi(4)),
            yf: st.dalpha / a.powi(3),
        }
    }

    /// `∇²Ω` expanded into three families: `−(ω_i^{n+μ} ⊗ ω_i^{n+μ}) ⊗ Ω`,
    /// `(ω_k^{n+ν} ⊗ ω_j^{n+μ}) ⊗ (ω^{n+μ} ∧ ω^{n+ν} ∧ Ω^{jk})` and
    /// `C^μ_j ⊗ (ω^{n+μ} ∧ Ω^j)`.
    pub fn hess_omega_terms(&self, y: &[f64]) -> Result<Vec<HessTerm>> {
        let st = self.state_at(y)?;
        Ok(self.hess_omega_terms_with(&st, y, Self::hess_coefficients(&st)))
    }

    /// As [`Self::hess_omega_terms`] with the two disputed coefficients
    /// supplied by the caller.
    pub fn hess_omega_terms_with(&self, st: &BSRadialState, y: &[f64], coeffs: HessCoefficients) -> Vec<HessTerm> {
        let (n, m) = (self.n, self.m);
        let f = self.f_matrix();
        let t = self.mixed_table(st, &f, y);
        let (u, v) = Self::mixed_coeffs(st);
        let (du, dv) = Self::mixed_coeffs_dot(st);
        let (a, b, da, db) = (st.alpha, st.beta, st.dalpha, st.dbeta);
        let w = 2.0 * db / (b * b);
        let omega = self.omega();
        let mut out: Vec<HessTerm> = Vec::new();
        let mut push = |c: f64, first: usize, second: usize, form: &Wedge| {
            if c != 0.0 {
                out.push(HessTerm {
                    coeff: Complex64::new(c, 0.0),
                    first,
                    second,
                    form: form.clone(),
                });
            }
        };
        // ω_a^{n+ν} ⊗ (one covector): expand the 1-form
        let expand = |mu: usize, i: usize| -> Vec<(usize, f64)> {
            t[mu][i].iter().enumerate().filter(|(_, &x)| x != 0.0).map(|(c, &x)| (c, x)).collect()
        };

        for mu in 0..m {
            for i in 0..n {
                for &(c, x) in &expand(mu, i) {
                    for &(e, z) in &expand(mu, i) {
                        push(-x * z, c, e, &omega);
                    }
                }
            }
        }
        for mu in 0..m {
            for nu in 0..m {
                for j in 0..n {
                    for k in 0..n {
                        if j == k {
                            continue;
                        }
                        let form = omega
                            .interior(j)
                            .and_then(|w| w.interior(k))
                            .expect("j ≠ k")
                            .prepend(n + nu)
                            .prepend(n + mu);
                        for &(c, x) in &expand(nu, k) {
                            for &(e, z) in &expand(mu, j) {
                                push(x * z, c, e, &form);
                            }
                        }
                    }
                }
            }
        }

        let fy = |mu: usize, i: usize, j: usize| f.contract_y(y, mu, i, j);
        for mu in 0..m {
            for j in 0..n {
                let form = omega.interior(j).expect("j < n").prepend(n + mu);
                let mut p = |c: f64, first: usize, second: usize| push(c, first, second, &form);
                for k in 0..n {
                    let fjk = fy(mu, j, k);
                    // derivative of the F-coefficient of ω_j^{n+μ}
                    for g in 0..m {
                        p((2.0 / b) * du * fjk * y[g], n + g, k);
                        p(f.get(mu, g, j, k) / (2.0 * a * a), n + g, k);
                        for &(c, x) in &expand(g, k) {
                            p(u * fjk * x, c, n + g);
                        }
                    }
                    for sg in 0..m {
                        for i in 0..n {
                            p(-coeffs.ff * fjk * fy(sg, i, k), n + sg, i);
                        }
                    }
                }
                // derivative of the y^μ-coefficient of ω_j^{n+μ}
                for nu in 0..m {
                    p(-(2.0 / b) * dv * y[mu] * y[nu], n + nu, j);
                }
                p(-2.0 * da / (a * b * b), n + mu, j);
                for g in 0..m {
                    for k in 0..n {
                        p(coeffs.yf * y[mu] * fy(g, k, j), n + g, k);
                    }
                }
                for nu in 0..m {
                    for &(c, x) in &expand(nu, j) {
                        p(-v * y[mu] * x, c, n + nu);
                    }
                }
                // rotation of the vertical index
                for nu in 0..m {
                    for &(c, x) in &expand(nu, j) {
                        p(w * y[nu] * x, n + mu, c);
                        p(-w * y[mu] * x, n + nu, c);
                    }
                }
                // rotation of the horizontal index
                for g in 0..m {
                    for k in 0..n {
                        for &(c, x) in &expand(mu, k) {
                            p(-u * fy(g, j, k) * x, n + g, c);
                        }
                    }
                }
            }
        }
        out
    }
}

fn space_form(n: usize, k: f64) -> RiemannSample {
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    RiemannSample::from_fn(n, |j, i, kk, l| k * (d(j, kk) * d(i, l) - d(j, l) * d(i, kk)))
}
