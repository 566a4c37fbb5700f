//! The Stenzel metric on `T*S^n`.
//!
//! All radial quantities are computed from `(h')^n = 2^n n S_{n-1}(2r)` with
//! `S_k(x) = ∫_0^x sinh^k`. Small arguments use power series in which the
//! cancellations inside `A` and `C` are carried out exactly; larger ones use
//! the normalised recursion for `S_k / sinh^k`, which stays finite for
//! `r` up to [`R_MAX`].

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::geom::{
    ComplexStructure, ConnectionSample, Covectors, DiagonalHessian, FrameIndexSet, GradTerm, HessTerm, RiemannSample, Wedge,
};
use crate::quad::{integrate, solve_increasing};
use crate::{LabError, Result};

/// Largest supported fiber radius.
pub const R_MAX: f64 = 300.0;
const SERIES_TERMS: usize = 24;
const SERIES_CUTOFF: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StenzelRadialState {
    pub n: usize,
    pub r: f64,
    pub rho: f64,
    pub hp: f64,
    pub hpp: f64,
    pub hppp: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub conn_a: f64,
    pub conn_b: f64,
    pub conn_c: f64,
    pub conn_a_dot: f64,
    pub conn_b_dot: f64,
    pub conn_c_dot: f64,
    /// Set for the zero section, where only limits are meaningful and
    /// `conn_b` is `-∞`.
    pub on_zero_section: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoefficientReport {
    pub n: usize,
    pub all_negative: bool,
    /// `(min, max)` of `|A|/ρ`, `|C|/ρ` and `|B|ρ` on the grid.
    pub a_over_rho: (f64, f64),
    pub c_over_rho: (f64, f64),
    pub b_times_rho: (f64, f64),
    /// Smallest `K` bounding all three ratios between `1/K` and `K`.
    pub k_empirical: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DerivativeResidual {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// The step was small enough for cancellation to dominate.
    pub step_warning: bool,
}

/// Residuals of the defining relations between `(a, b, c)` and `(A, B, C)`,
/// each scaled by `max(1, |term|)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IdentityResidual {
    /// `A = (a²-b²-c²)/2abc` and its two companions.
    pub coefficients: f64,
    /// `ȧ/a + A = 0`, `ḃ/b + B = 0`, `ċ/c + (n-1)C = 0`.
    pub ode: f64,
}

impl IdentityResidual {
    pub fn max(&self) -> f64 {
        self.coefficients.max(self.ode)
    }
}

impl DerivativeResidual {
    pub fn max(&self) -> f64 {
        self.a.max(self.b).max(self.c)
    }
}

/// `(sinh x / x)^k` as a power series in `x²`.
fn sinhc_pow_series(k: usize) -> Vec<f64> {
    let mut base = vec![0.0; SERIES_TERMS];
    let mut fact = 1.0;
    for (m, coef) in base.iter_mut().enumerate() {
        if m > 0 {
            fact *= ((2 * m) * (2 * m + 1)) as f64;
        }
        *coef = 1.0 / fact;
    }
    let mut out = vec![0.0; SERIES_TERMS];
    out[0] = 1.0;
    for _ in 0..k {
        let mut next = vec![0.0; SERIES_TERMS];
        for i in 0..SERIES_TERMS {
            for j in 0..SERIES_TERMS - i {
                next[i + j] += out[i] * base[j];
            }
        }
        out = next;
    }
    out
}

fn horner(coef: &[f64], t: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

#[derive(Debug, Clone, Copy)]
struct Core {
    hp: f64,
    hpp: f64,
    hppp: f64,
    a_num: f64,
    b_num: f64,
    c_num: f64,
}

/// Stenzel metric of complex dimension `n ≥ 2`.
#[derive(Debug, Clone)]
pub struct Stenzel {
    pub n: usize,
    shc_pow: Vec<f64>,
    sigma: Vec<f64>,
    j_series: Vec<f64>,
    k_series: Vec<f64>,
}

impl Stenzel {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(LabError::Domain("n > 1 required".into()));
        }
        let s_n = sinhc_pow_series(n);
        let s_nm1 = sinhc_pow_series(n - 1);
        let nf = n as f64;
        // S_{n-1}(x) = x^n Σ σ_m x^{2m}
        let sigma: Vec<f64> = (0..SERIES_TERMS)
            .map(|m| s_nm1[m] / (nf + 2.0 * m as f64))
            .collect();
        // J = sinh^n/n − S_{n-1} = x^{n+2} Σ_m j_m x^{2m}
        let j_series: Vec<f64> = (1..SERIES_TERMS)
            .map(|m| s_n[m] / nf - sigma[m])
            .collect();
        // K = cosh·S_{n-1} − sinh^n/n = x^{n+2} Σ_m k_m x^{2m}
        let mut cosh_c = vec![0.0; SERIES_TERMS];
        let mut fact = 1.0;
        for (m, c) in cosh_c.iter_mut().enumerate() {
            if m > 0 {
                fact *= ((2 * m - 1) * (2 * m)) as f64;
            }
            *c = 1.0 / fact;
        }
        let mut prod = vec![0.0; SERIES_TERMS];
        for i in 0..SERIES_TERMS {
            for l in 0..SERIES_TERMS - i {
                prod[i + l] += cosh_c[i] * sigma[l];
            }
        }
        let k_series: Vec<f64> = (1..SERIES_TERMS).map(|m| prod[m] - s_n[m] / nf).collect();
        Ok(Self {
            n,
            shc_pow: sinhc_pow_series(1),
            sigma,
            j_series,
            k_series,
        })
    }

    pub fn frame(&self) -> FrameIndexSet {
        FrameIndexSet { n: self.n, m: self.n }
    }

    fn check_r(&self, r: f64) -> Result<()> {
        if !(r >= 0.0) {
            return Err(LabError::Domain(format!("r must be non-negative, got {r}")));
        }
        if r > R_MAX {
            return Err(LabError::Numeric(format!("r = {r} exceeds the supported maximum {R_MAX}")));
        }
        Ok(())
    }

    fn core(&self, r: f64) -> Core {
        let n = self.n;
        let nf = n as f64;
        let x = 2.0 * r;
        if self.n == 2 {
            // (h')² = 16 sinh² r
            let hp = 4.0 * r.sinh();
            let hpp = 4.0 * r.cosh();
            let hppp = 4.0 * r.sinh();
            let (sh, ch) = (r.sinh(), r.cosh());
            // 2 coth 2r − coth r = coth r − 2/sinh 2r = tanh r
            let th = r.tanh();
            return Core {
                hp,
                hpp,
                hppp,
                a_num: th,
                b_num: (ch * ch + 1.0) / (sh * ch),
                c_num: th,
            };
        }
        if x <= SERIES_CUTOFF {
            let t = x * x;
            let shx = horner(&self.shc_pow, t);
            let sigma = horner(&self.sigma, t);
            let jq = horner(&self.j_series, t);
            let kq = horner(&self.k_series, t);
            let hp = 2.0 * x * (nf * sigma).powf(1.0 / nf);
            let ratio = 2.0 * shx.powi(n as i32 - 1) / (x * nf * sigma);
            let hpp = ratio * hp;
            let a_num = 2.0 * x * jq / (shx * sigma);
            let c_num = 2.0 * x * kq / (shx * sigma);
            let b_num = ratio + 2.0 / (x * shx);
            Core {
                hp,
                hpp,
                hppp: hpp * (nf - 1.0) * c_num,
                a_num,
                b_num,
                c_num,
            }
        } else {
            let em2 = (-2.0 * x).exp();
            let inv_sinh = 2.0 * (-x).exp() / (1.0 - em2);
            let inv_sinh2 = inv_sinh * inv_sinh;
            let coth = (1.0 + em2) / (1.0 - em2);
            let ln_sinh = x + ((1.0 - em2) / 2.0).ln();
            let k = n - 1;
            let mut r_prev = if k % 2 == 0 { x } else { (x / 2.0).tanh() };
            let start = if k % 2 == 0 { 2 } else { 3 };
            let mut kk = start;
            while kk <= k {
                let kf = kk as f64;
                r_prev = coth / kf - (kf - 1.0) / kf * r_prev * inv_sinh2;
                kk += 2;
            }
            let rk = r_prev;
            let ln_hp = std::f64::consts::LN_2 + ((nf * rk).ln() + (nf - 1.0) * ln_sinh) / nf;
            let hp = ln_hp.exp();
            let ratio = 2.0 / (nf * rk);
            let hpp = ratio * hp;
            let c_num = 2.0 * coth - ratio;
            Core {
                hp,
                hpp,
                hppp: hpp * (nf - 1.0) * c_num,
                a_num: ratio - 2.0 * inv_sinh,
                b_num: ratio + 2.0 * inv_sinh,
                c_num,
            }
        }
    }

    /// `(h', h'', h''')` at `r`.
    pub fn hprime(&self, r: f64) -> Result<(f64, f64, f64)> {
        self.check_r(r)?;
        if r == 0.0 {
            // h'' → 4, h''' → 0
            return Ok((0.0, 4.0, 0.0));
        }
        let c = self.core(r);
        Ok((c.hp, c.hpp, c.hppp))
    }

    /// `h'` from adaptive quadrature of `(h')^n = 2^{n+1} n ∫_0^r sinh(2u)^{n-1}`,
    /// independent of the series and recursion in [`Stenzel::hprime`].
    pub fn hprime_by_quadrature(&self, r: f64) -> Result<f64> {
        self.check_r(r)?;
        let n = self.n as i32;
        let scale = (2.0 * r).sinh().powi(n - 1).max(1.0) * r.max(1.0);
        let integral = integrate(|u| (2.0 * u).sinh().powi(n - 1), 0.0, r, 1e-14 * scale)?;
        let nf = self.n as f64;
        Ok((2f64.powi(n + 1) * nf * integral).powf(1.0 / nf))
    }

    /// `c(r) = √h''/2`.
    pub fn c_of_r(&self, r: f64) -> f64 {
        if r == 0.0 {
            1.0
        } else {
            self.core(r).hpp.sqrt() / 2.0
        }
    }

    /// Geodesic distance to the zero section, `ρ = ∫_0^r c`.
    pub fn rho_of_r(&self, r: f64) -> Result<f64> {
        self.check_r(r)?;
        let scale = 1.0 + r * self.c_of_r(r);
        integrate(|u| self.c_of_r(u), 0.0, r, 1e-13 * scale)
    }

    pub fn r_of_rho(&self, rho: f64) -> Result<f64> {
        if !(rho >= 0.0) {
            return Err(LabError::Domain(format!("rho must be non-negative, got {rho}")));
        }
        if rho == 0.0 {
            return Ok(0.0);
        }
        // c ≥ 1, so r ≤ ρ
        let hi = rho.min(R_MAX);
        solve_increasing(
            |r| self.rho_of_r(r).unwrap_or(f64::INFINITY),
            |r| self.c_of_r(r),
            rho,
            0.0,
            hi,
            1e-13 * (1.0 + rho),
        )
    }

    pub fn radial_state(&self, r: f64) -> Result<StenzelRadialState> {
        self.check_r(r)?;
        if r == 0.0 {
            return Ok(StenzelRadialState {
                n: self.n,
                r,
                rho: 0.0,
                hp: 0.0,
                hpp: 4.0,
                hppp: 0.0,
                a: 1.0,
                b: 0.0,
                c: 1.0,
                conn_a: 0.0,
                conn_b: f64::NEG_INFINITY,
                conn_c: 0.0,
                conn_a_dot: -(self.n as f64) / (self.n as f64 + 2.0),
                conn_b_dot: f64::INFINITY,
                conn_c_dot: -2.0 / (self.n as f64 + 2.0),
                on_zero_section: true,
            });
        }
        let core = self.core(r);
        let sq = core.hpp.sqrt();
        let ca = -core.a_num / sq;
        let cb = -core.b_num / sq;
        let cc = -core.c_num / sq;
        let nf = self.n as f64;
        let s = ca + cb + cc;
        Ok(StenzelRadialState {
            n: self.n,
            r,
            rho: self.rho_of_r(r)?,
            hp: core.hp,
            hpp: core.hpp,
            hppp: core.hppp,
            a: (core.hp / r.tanh()).sqrt() / 2.0,
            b: (core.hp * r.tanh()).sqrt() / 2.0,
            c: sq / 2.0,
            conn_a: ca,
            conn_b: cb,
            conn_c: cc,
            conn_a_dot: -nf * cb * cc + ca * s,
            conn_b_dot: -nf * ca * cc + cb * s,
            conn_c_dot: -2.0 * ca * cb + (nf - 1.0) * cc * s,
            on_zero_section: false,
        })
    }

    pub fn radial_state_at_rho(&self, rho: f64) -> Result<StenzelRadialState> {
        let r = self.r_of_rho(rho)?;
        let mut st = self.radial_state(r)?;
        st.rho = rho;
        Ok(st)
    }

    /// Connection scalars `(A, B, C)` at `r` without computing `ρ`.
    pub fn abc(&self, r: f64) -> Result<(f64, f64, f64)> {
        self.check_r(r)?;
        let core = self.core(r);
        let sq = core.hpp.sqrt();
        Ok((-core.a_num / sq, -core.b_num / sq, -core.c_num / sq))
    }

    pub fn coefficient_sweep(&self, grid: &[f64]) -> Result<CoefficientReport> {
        let mut all_negative = true;
        let mut ra = (f64::INFINITY, 0.0_f64);
        let mut rc = (f64::INFINITY, 0.0_f64);
        let mut rb = (f64::INFINITY, 0.0_f64);
        for &rho in grid {
            if !(rho > 0.0 && rho < 1.0) {
                return Err(LabError::Domain(format!("grid point {rho} outside (0, 1)")));
            }
            let st = self.radial_state_at_rho(rho)?;
            all_negative &= st.conn_a < 0.0 && st.conn_b < 0.0 && st.conn_c < 0.0;
            let a = st.conn_a.abs() / rho;
            let c = st.conn_c.abs() / rho;
            let b = st.conn_b.abs() * rho;
            ra = (ra.0.min(a), ra.1.max(a));
            rc = (rc.0.min(c), rc.1.max(c));
            rb = (rb.0.min(b), rb.1.max(b));
        }
        let k = [ra, rc, rb]
            .iter()
            .map(|(lo, hi)| hi.max(1.0 / lo))
            .fold(1.0, f64::max);
        Ok(CoefficientReport {
            n: self.n,
            all_negative,
            a_over_rho: ra,
            c_over_rho: rc,
            b_times_rho: rb,
            k_empirical: k,
        })
    }

    /// Compares central differences of `A, B, C` in `ρ` with the quadratic
    /// expressions for their derivatives.
    pub fn derivative_residual(&self, st: &StenzelRadialState, h_fd: f64) -> Result<DerivativeResidual> {
        if st.on_zero_section || st.rho <= h_fd {
            return Err(LabError::Domain("step reaches the zero section".into()));
        }
        let plus = self.radial_state_at_rho(st.rho + h_fd)?;
        let minus = self.radial_state_at_rho(st.rho - h_fd)?;
        let d = |p: f64, m: f64| (p - m) / (2.0 * h_fd);
        Ok(DerivativeResidual {
            a: (d(plus.conn_a, minus.conn_a) - st.conn_a_dot).abs(),
            b: (d(plus.conn_b, minus.conn_b) - st.conn_b_dot).abs(),
            c: (d(plus.conn_c, minus.conn_c) - st.conn_c_dot).abs(),
            step_warning: h_fd < 1e-6,
        })
    }

    pub fn identity_residual(&self, st: &StenzelRadialState) -> Result<IdentityResidual> {
        if st.on_zero_section {
            return Err(LabError::Domain("identities need r > 0".into()));
        }
        let (a, b, c, r) = (st.a, st.b, st.c, st.r);
        let nf = self.n as f64;
        let scaled = |x: f64, y: f64| (x - y).abs() / y.abs().max(1.0);
        let abc2 = 2.0 * a * b * c;
        let coefficients = scaled((a * a - b * b - c * c) / abc2, st.conn_a)
            .max(scaled((b * b - a * a - c * c) / abc2, st.conn_b))
            .max(scaled((c * c - a * a - b * b) / abc2, st.conn_c));
        // d/dρ = c⁻¹ d/dr
        let da = (st.hpp / r.tanh() - st.hp / r.sinh().powi(2)) / (8.0 * a);
        let db = (st.hpp * r.tanh() + st.hp / r.cosh().powi(2)) / (8.0 * b);
        let dc = st.hppp / (8.0 * c);
        let ode = scaled(-da / (a * c), st.conn_a)
            .max(scaled(-db / (b * c), st.conn_b))
            .max(scaled(-dc / (c * c), (nf - 1.0) * st.conn_c));
        Ok(IdentityResidual { coefficients, ode })
    }

    pub fn complex_structure(&self) -> ComplexStructure {
        ComplexStructure::horizontal_to_vertical(self.n)
    }

    /// Riemann tensor in the frame `ω^1, ω^j, ω^{n+1}, ω^{n+j}` (0-based:
    /// `0`, `1..n`, `n`, `n+1..2n`).
    pub fn curvature(&self, st: &StenzelRadialState) -> Result<RiemannSample> {
        if st.on_zero_section {
            return Err(LabError::Domain("curvature table needs r > 0".into()));
        }
        let n = self.n;
        let nf = n as f64;
        let (a, b, c) = (st.conn_a, st.conn_b, st.conn_c);
        let mut entries = Vec::new();
        let first = (nf - 1.0) * (c * a + b * c) - 2.0 * a * b;
        entries.push(([0, n, 0, n], (nf - 1.0) * first));
        for j in 1..n {
            entries.push(([0, j, 0, j], a * b + b * c - nf * c * a));
            entries.push(([0, n + j, 0, n + j], a * b + c * a - nf * b * c));
            entries.push(([0, n, n + j, j], first));
        }
        let d = |p: usize, q: usize| if p == q { 1.0 } else { 0.0 };
        for i in 1..n {
            for k in 1..n {
                for j in 1..n {
                    for l in 1..n {
                        let v = -a * b * (d(i, j) * d(k, l) + d(i, l) * d(j, k))
                            + (b * c + a * c) * d(i, k) * d(j, l);
                        entries.push(([i, n + k, j, n + l], v));
                        let w = (a * b + b * c + c * a) * (d(i, j) * d(k, l) - d(i, l) * d(j, k));
                        entries.push(([i, k, j, l], w));
                    }
                }
            }
        }
        let scale = 1.0 + a.abs().max(b.abs()).max(c.abs()).powi(2);
        RiemannSample::from_table(2 * n, &entries, Some(&self.complex_structure()), 1e-12 * scale)
    }

    /// Hessian of `ψ = ρ²`.
    pub fn hessian_psi(&self, st: &StenzelRadialState) -> DiagonalHessian {
        let n = self.n;
        let mut diag = vec![0.0; 2 * n];
        diag[n] = 2.0;
        if st.on_zero_section {
            for j in 1..n {
                diag[n + j] = 2.0;
            }
            return DiagonalHessian { diag, limit: true };
        }
        let rho = st.rho;
        diag[0] = -2.0 * rho * (n as f64 - 1.0) * st.conn_c;
        for j in 1..n {
            diag[j] = -2.0 * rho * st.conn_a;
            diag[n + j] = -2.0 * rho * st.conn_b;
        }
        DiagonalHessian { diag, limit: false }
    }

    /// Connection coefficients at a point, in a gauge where the blocks
    /// `ω_i^j = ω_{n+i}^{n+j}` vanish there.
    pub fn connection(&self, st: &StenzelRadialState) -> ConnectionSample {
        let n = self.n;
        let nf = n as f64;
        let (a, b, c) = (st.conn_a, st.conn_b, st.conn_c);
        let (ad, cd) = (st.conn_a_dot, st.conn_c_dot);
        let mut g = ConnectionSample::new(self.frame());
        let rad = n;
        g.add(n, 0, 0, -(nf - 1.0) * c);
        g.add_derivative(n, 0, 0, rad, -(nf - 1.0) * cd);
        for j in 1..n {
            g.add(n, j, j, -a);
            g.add_derivative(n, j, j, rad, -ad);
            g.add(n, n + j, n + j, -b);
            g.add(n + j, j, 0, c);
            g.add_derivative(n + j, j, 0, rad, cd);
            g.add(0, n + j, j, a);
            g.add_derivative(0, n + j, j, rad, ad);
            g.add(j, 0, n + j, b);
        }
        g
    }

    fn phi(&self) -> Wedge {
        Wedge::new((1..self.n).collect())
    }

    /// `∇Ω` as the four families of terms `C ω^1 ⊗ …`, `A ω^j ⊗ …`.
    pub fn grad_omega_terms(&self, st: &StenzelRadialState) -> Vec<GradTerm> {
        let n = self.n;
        let nf = n as f64;
        let (a, c) = (st.conn_a, st.conn_c);
        let phi = self.phi();
        let t = |coeff: f64, dir: usize, form: Wedge| GradTerm {
            coeff: Complex64::new(coeff, 0.0),
            dir,
            form,
        };
        let mut out = vec![t((nf - 1.0) * c, 0, phi.prepend(n))];
        for j in 1..n {
            let phij = phi.interior(j).expect("j in Φ");
            out.push(t(a, j, phi.prepend(n + j)));
            out.push(t(-c, 0, phij.prepend(n + j).prepend(0)));
            out.push(t(a, j, phij.prepend(n).prepend(0)));
        }
        out
    }

    /// `∇²Ω = (n−1)·I + II + III + IV` expanded term by term.
    pub fn hess_omega_terms(&self, st: &StenzelRadialState) -> Vec<HessTerm> {
        let n = self.n;
        let nf = n as f64;
        let (a, b, c) = (st.conn_a, st.conn_b, st.conn_c);
        let (ad, cd) = (st.conn_a_dot, st.conn_c_dot);
        let phi = self.phi();
        let omega = Wedge::new((0..n).collect());
        let phi1 = |j: usize| phi.interior(j).expect("j in Φ");
        let phi2 = |j: usize, k: usize| phi.interior(j).and_then(|w| w.interior(k));
        let mut out: Vec<HessTerm> = Vec::new();
        let mut push = |scale: f64, coeff: f64, first: usize, second: usize, form: Wedge| {
            out.push(HessTerm {
                coeff: Complex64::new(scale * coeff, 0.0),
                first,
                second,
                form,
            });
        };
        let js: Vec<usize> = (1..n).collect();

        // the common factor ∇(C ω^1) without its C∇ω^1-free part
        let dc_pairs = |push: &mut dyn FnMut(f64, usize, usize)| {
            push(cd, n, 0);
            for &j in &js {
                push(-b * c, n + j, j);
                push(a * c, j, n + j);
            }
            push((nf - 1.0) * c * c, 0, n);
        };
        let da_pairs = |j: usize, push: &mut dyn FnMut(f64, usize, usize)| {
            push(ad, n, j);
            push(a * a, j, n);
            push(a * b, n + j, 0);
            push(-a * c, 0, n + j);
        };

        // I, weighted by n − 1
        let s = nf - 1.0;
        push(s, -(nf - 1.0) * c * c, 0, 0, omega.clone());
        for &j in &js {
            push(s, -b * c, n + j, 0, phi.prepend(n + j));
            push(s, -b * c, n + j, 0, phi1(j).prepend(n).prepend(0));
            push(s, -c * c, 0, 0, phi1(j).prepend(n + j).prepend(n));
        }
        dc_pairs(&mut |k, f, g| push(s, k, f, g, phi.prepend(n)));

        // II
        for &j in &js {
            push(1.0, -a * a, j, j, omega.clone());
            push(1.0, a * b, n + j, j, phi.prepend(n));
            da_pairs(j, &mut |k, f, g| push(1.0, k, f, g, phi.prepend(n + j)));
            for &k in &js {
                push(1.0, a * b, n + k, j, phi1(k).prepend(0).prepend(n + j));
                push(1.0, -a * c, 0, j, phi1(k).prepend(n + k).prepend(n + j));
                push(1.0, a * a, k, j, phi1(k).prepend(n).prepend(n + j));
            }
        }

        // III; the Ω-direction coefficient carries the sum over j
        push(1.0, -(nf - 1.0) * c * c, 0, 0, omega.clone());
        for &j in &js {
            push(1.0, -c * c * (nf - 1.0), 0, 0, phi1(j).prepend(n + j).prepend(n));
            for &k in &js {
                if let Some(w) = phi2(j, k) {
                    push(1.0, c * c, 0, 0, w.prepend(n + k).prepend(n + j).prepend(0));
                }
            }
        }
        for &k in &js {
            dc_pairs(&mut |co, f, g| push(-1.0, co, f, g, phi1(k).prepend(n + k).prepend(0)));
        }
        for &j in &js {
            for &k in &js {
                push(1.0, -a * c, k, 0, phi1(j).prepend(n + j).prepend(n + k));
                if let Some(w) = phi2(j, k) {
                    push(1.0, -a * c, k, 0, w.prepend(n).prepend(n + j).prepend(0));
                }
            }
            push(1.0, -b * c, n + j, 0, phi.prepend(n + j));
            push(1.0, -b * c, n + j, 0, phi1(j).prepend(n).prepend(0));
        }

        // IV
        for &j in &js {
            push(1.0, -a * a, j, j, omega.clone());
            da_pairs(j, &mut |co, f, g| push(1.0, co, f, g, phi1(j).prepend(n).prepend(0)));
            push(1.0, a * b, n + j, j, phi.prepend(n));
            for &k in &js {
                push(1.0, a * a, k, j, phi1(j).prepend(n).prepend(n + k));
                push(1.0, -a * b, n + k, j, phi1(j).prepend(n + k).prepend(0));
                if let Some(w) = phi2(j, k) {
                    push(1.0, -a * c, 0, j, w.prepend(n + k).prepend(n).prepend(0));
                }
            }
        }
        out
    }

    pub fn covectors(&self) -> Covectors {
        Covectors::real_coframe(2 * self.n)
    }
}

/// Orthogonal `T` with first row `y/|y|`, the product of two Householder
/// reflections; equal to the identity when `y` is a positive multiple of
/// `e_1` and smooth away from `y ∥ −e_1`.
pub fn spherical_gauge(y: &[f64]) -> Result<DMatrix<f64>> {
    let n = y.len();
    let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0.0 {
        return Err(LabError::Domain("spherical gauge needs y ≠ 0".into()));
    }
    let yh: Vec<f64> = y.iter().map(|v| v / r).collect();
    // H2 H1 e_1 = ŷ with H1 = I − 2 e1 e1ᵀ and H2 reflecting −e_1 to ŷ
    let mut w: Vec<f64> = yh.iter().map(|v| -v).collect();
    w[0] -= 1.0;
    let ww: f64 = w.iter().map(|v| v * v).sum();
    if ww < 1e-24 {
        return Err(LabError::Domain("spherical gauge is singular at y ∥ −e_1".into()));
    }
    let mut h1 = DMatrix::<f64>::identity(n, n);
    h1[(0, 0)] = -1.0;
    let wv = nalgebra::DVector::from_vec(w);
    let h2 = DMatrix::<f64>::identity(n, n) - (&wv * wv.transpose()) * (2.0 / ww);
    Ok((h2 * h1).transpose())
}
