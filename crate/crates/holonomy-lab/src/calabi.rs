//! The Calabi hyperkähler metric on `T*CP^n`.
//!
//! Complex frame index `μ ∈ 0..2n` corresponds to the real pair
//! `(2μ, 2μ+1)` with `ξ^μ = ω^{2μ} + i ω^{2μ+1}`. The horizontal block is
//! `ξ^0, …, ξ^{n-1}`; `ξ^n` is the radial/tautological direction with
//! `re ξ^n = h dr` (real index `2n`), and `ξ^{n+j}` for `j ∈ 1..n` are the
//! remaining fiber directions.
//!
//! Hermitian forms are written `θ(lower, upper)` so that
//! `dξ^μ = −θ(ν, μ) ∧ ξ^ν`, and curvature forms `𝓡(lower, upper)` likewise.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::geom::{
    ComplexStructure, ConnectionSample, Covectors, DiagonalHessian, FrameIndexSet, GradTerm, HessTerm, RiemannSample, Wedge,
};
use crate::quad::{integrate, solve_increasing};
use crate::{LabError, Result};

/// Largest supported fiber radius; `cosh(2r)²` overflows shortly after.
pub const R_MAX: f64 = 150.0;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalabiRadialState {
    pub n: usize,
    pub r: f64,
    pub rho: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub f: f64,
    pub h: f64,
    /// `r`-derivatives of `a, b, c, f`.
    pub da: f64,
    pub db: f64,
    pub dc: f64,
    pub df: f64,
}

impl CalabiRadialState {
    pub fn on_zero_section(&self) -> bool {
        self.r == 0.0
    }

    /// `cosh 2r`.
    fn q(&self) -> f64 {
        self.c * self.c
    }
}

/// The seven relations of the hyperkähler system, in the order
/// `(a²)' − 2hf`, `(b²)' − 2hf`, `(c²)' − 4hf`, `a² + b² − c²`,
/// `(ab)' − hc`, `(fc)' − hc`, `ab − fc`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HkResidual {
    pub closed_form: [f64; 7],
    pub finite_difference: [f64; 7],
}

impl HkResidual {
    pub fn max_closed_form(&self) -> f64 {
        self.closed_form.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_finite_difference(&self) -> f64 {
        self.finite_difference.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Scalar coefficients of the Hermitian connection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConnectionCoefficients {
    /// `2f/c²`
    pub p: f64,
    /// `f/b²`, equal to `a/(bc)`
    pub q: f64,
    /// `f/a²`, equal to `b/(ac)`
    pub s: f64,
    /// `2f/c² − 1/f`
    pub im: f64,
    /// `ρ`-derivatives of `p, q, s`.
    pub dp: f64,
    pub dq: f64,
    pub ds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ix {
    One,
    J(usize),
    N1,
    NJ(usize),
}

type OneForm = Vec<(Complex64, usize)>;
/// `Σ c · α ∧ β` over covector labels.
type TwoForm = Vec<(Complex64, usize, usize)>;

#[derive(Debug, Clone)]
pub struct Calabi {
    pub n: usize,
}

impl Calabi {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(LabError::Domain("n ≥ 1 required".into()));
        }
        Ok(Self { n })
    }

    /// Real frame: `2n` horizontal, `2n` vertical directions.
    pub fn frame(&self) -> FrameIndexSet {
        FrameIndexSet {
            n: 2 * self.n,
            m: 2 * self.n,
        }
    }

    pub fn complex_structure(&self) -> ComplexStructure {
        ComplexStructure::interleaved(2 * self.n)
    }

    fn check_r(r: f64) -> Result<()> {
        if !(r >= 0.0) {
            return Err(LabError::Domain(format!("r must be non-negative, got {r}")));
        }
        if r > R_MAX {
            return Err(LabError::Numeric(format!("r = {r} exceeds the supported maximum {R_MAX}")));
        }
        Ok(())
    }

    pub fn rho_of_r(r: f64) -> Result<f64> {
        Self::check_r(r)?;
        let scale = 1.0 + r * (2.0 * r).cosh().sqrt();
        integrate(|u| (2.0 * u).cosh().sqrt(), 0.0, r, 1e-13 * scale)
    }

    pub fn r_of_rho(rho: f64) -> Result<f64> {
        if !(rho >= 0.0) {
            return Err(LabError::Domain(format!("rho must be non-negative, got {rho}")));
        }
        if rho == 0.0 {
            return Ok(0.0);
        }
        solve_increasing(
            |r| Self::rho_of_r(r).unwrap_or(f64::INFINITY),
            |r| (2.0 * r).cosh().sqrt(),
            rho,
            0.0,
            rho.min(R_MAX),
            1e-13 * (1.0 + rho),
        )
    }

    pub fn radial_state(&self, r: f64) -> Result<CalabiRadialState> {
        Self::check_r(r)?;
        let q = (2.0 * r).cosh();
        let s2 = (2.0 * r).sinh();
        let c = q.sqrt();
        Ok(CalabiRadialState {
            n: self.n,
            r,
            rho: Self::rho_of_r(r)?,
            a: r.sinh(),
            b: r.cosh(),
            c,
            f: s2 / (2.0 * c),
            h: c,
            da: r.cosh(),
            db: r.sinh(),
            dc: s2 / c,
            df: (q * q + 1.0) / (2.0 * q * c),
        })
    }

    pub fn radial_state_at_rho(&self, rho: f64) -> Result<CalabiRadialState> {
        let r = Self::r_of_rho(rho)?;
        let mut st = self.radial_state(r)?;
        st.rho = rho;
        Ok(st)
    }

    /// Residuals of the hyperkähler system, with derivatives once in closed
    /// form and once by central differences of step `h_fd`.
    pub fn hk_system_residual(&self, st: &CalabiRadialState, h_fd: f64) -> Result<HkResidual> {
        // derivatives of a², b², c², ab, fc
        let rel = |s: &CalabiRadialState, d: [f64; 5]| -> [f64; 7] {
            let hf = s.h * s.f;
            let hc = s.h * s.c;
            [
                d[0] - 2.0 * hf,
                d[1] - 2.0 * hf,
                d[2] - 4.0 * hf,
                s.a * s.a + s.b * s.b - s.c * s.c,
                d[3] - hc,
                d[4] - hc,
                s.a * s.b - s.f * s.c,
            ]
        };
        let closed = rel(
            st,
            [
                2.0 * st.a * st.da,
                2.0 * st.b * st.db,
                2.0 * st.c * st.dc,
                st.da * st.b + st.a * st.db,
                st.df * st.c + st.f * st.dc,
            ],
        );
        if st.r < h_fd {
            return Err(LabError::Domain("finite-difference step reaches the zero section".into()));
        }
        let p = self.radial_state(st.r + h_fd)?;
        let m = self.radial_state(st.r - h_fd)?;
        let d = |g: fn(&CalabiRadialState) -> f64| (g(&p) - g(&m)) / (2.0 * h_fd);
        let fd = rel(
            st,
            [
                d(|s| s.a * s.a),
                d(|s| s.b * s.b),
                d(|s| s.c * s.c),
                d(|s| s.a * s.b),
                d(|s| s.f * s.c),
            ],
        );
        Ok(HkResidual {
            closed_form: closed,
            finite_difference: fd,
        })
    }

    pub fn connection_coefficients(&self, st: &CalabiRadialState) -> Result<ConnectionCoefficients> {
        if st.on_zero_section() {
            return Err(LabError::Domain("the Hermitian connection is singular at r = 0".into()));
        }
        let q = st.q();
        let sq = st.c;
        // q − 1 = 2 sinh² r keeps f/a² accurate for small r
        let qm1 = 2.0 * st.a * st.a;
        let s2 = (2.0 * st.r).sinh();
        let p = s2 / (q * sq);
        let qq = s2 / (sq * (1.0 + q));
        let s = s2 / (sq * qm1);
        let dp_dr = (3.0 - q * q) / (q * q * sq);
        let dq_dr = 2.0 / (sq * (1.0 + q)) - qm1 / (q * sq);
        let ds_dr = -2.0 / (sq * qm1) - (q + 1.0) / (q * sq);
        Ok(ConnectionCoefficients {
            p,
            q: qq,
            s,
            im: p - 1.0 / st.f,
            dp: dp_dr / st.h,
            dq: dq_dr / st.h,
            ds: ds_dr / st.h,
        })
    }

    fn ix(&self, mu: usize) -> Ix {
        let n = self.n;
        match mu {
            0 => Ix::One,
            m if m < n => Ix::J(m),
            m if m == n => Ix::N1,
            m => Ix::NJ(m - n),
        }
    }

    // covector labels in `covectors()`
    fn xi(&self, mu: usize) -> usize {
        mu
    }
    fn xib(&self, mu: usize) -> usize {
        2 * self.n + mu
    }
    fn re_label(&self, mu: usize) -> usize {
        4 * self.n + mu
    }
    fn im_label(&self, mu: usize) -> usize {
        6 * self.n + mu
    }
    fn conj_label(&self, l: usize) -> usize {
        let big = 2 * self.n;
        if l < big {
            l + big
        } else if l < 2 * big {
            l - big
        } else {
            l
        }
    }

    /// Rows `ξ^μ`, `conj ξ^μ`, `re ξ^μ`, `im ξ^μ` for `μ ∈ 0..2n`, in that
    /// order, over the real frame.
    pub fn covectors(&self) -> Covectors {
        let big = 2 * self.n;
        let d = 2 * big;
        let mut t = Covectors::new(d);
        let row = |mu: usize, x: Complex64, y: Complex64| {
            let mut v = vec![ZERO; d];
            v[2 * mu] = x;
            v[2 * mu + 1] = y;
            v
        };
        for mu in 0..big {
            t.push(row(mu, re(1.0), I));
        }
        for mu in 0..big {
            t.push(row(mu, re(1.0), -I));
        }
        for mu in 0..big {
            t.push(row(mu, re(1.0), ZERO));
        }
        for mu in 0..big {
            t.push(row(mu, ZERO, re(1.0)));
        }
        t
    }

    fn conj1(&self, w: &OneForm) -> OneForm {
        w.iter().map(|&(c, l)| (c.conj(), self.conj_label(l))).collect()
    }

    fn conj2(&self, w: &TwoForm) -> TwoForm {
        w.iter()
            .map(|&(c, a, b)| (c.conj(), self.conj_label(a), self.conj_label(b)))
            .collect()
    }

    /// `θ(lower, upper)` in the gauge where the Fubini-Study and `dT`
    /// contributions to the blocks `θ(j, k)` vanish at the point.
    fn theta(&self, k: &ConnectionCoefficients, lo: usize, up: usize) -> OneForm {
        let n = self.n;
        let neg = |w: OneForm| -> OneForm { w.into_iter().map(|(c, l)| (-c, l)).collect() };
        match (self.ix(lo), self.ix(up)) {
            (Ix::One, Ix::One) => vec![(I * k.im, self.im_label(n))],
            (Ix::N1, Ix::N1) => vec![(-I * k.im, self.im_label(n))],
            (Ix::J(a), Ix::J(b)) if a == b => vec![(I * k.q, self.im_label(n))],
            (Ix::NJ(a), Ix::NJ(b)) if a == b => vec![(-I * k.q, self.im_label(n))],
            (Ix::J(_), Ix::J(_)) | (Ix::NJ(_), Ix::NJ(_)) => vec![],
            (Ix::NJ(_), Ix::J(_)) | (Ix::J(_), Ix::NJ(_)) => vec![],
            (Ix::N1, Ix::One) => vec![(re(k.p), self.xi(0))],
            (Ix::N1, Ix::J(j)) => vec![(re(k.q), self.xi(j))],
            (Ix::NJ(j), Ix::One) => vec![(re(k.q), self.xi(j))],
            (Ix::N1, Ix::NJ(j)) => vec![(re(k.s), self.xi(n + j))],
            (Ix::J(j), Ix::One) => vec![(re(-k.s), self.xi(n + j))],
            // skew-Hermitian partners
            (Ix::One, _) | (Ix::J(_), Ix::N1) | (Ix::NJ(_), Ix::N1) => {
                neg(self.conj1(&self.theta(k, up, lo)))
            }
        }
    }

    /// `θ(lower, upper)` for every pair, as complex values on the real frame
    /// vector `e_c`.
    fn theta_value(&self, table: &Covectors, w: &OneForm, c: usize) -> Complex64 {
        let mut e = vec![0.0; table.dim()];
        e[c] = 1.0;
        w.iter().fold(ZERO, |acc, &(co, l)| acc + co * table.eval(l, &e))
    }

    /// Largest `|θ(ν, μ) + conj θ(μ, ν)|` over frame vectors.
    pub fn hermitian_defect(&self, st: &CalabiRadialState) -> Result<f64> {
        let k = self.connection_coefficients(st)?;
        let table = self.covectors();
        let big = 2 * self.n;
        let mut m: f64 = 0.0;
        for lo in 0..big {
            for up in 0..big {
                let a = self.theta(&k, lo, up);
                let b = self.theta(&k, up, lo);
                for c in 0..2 * big {
                    let v = self.theta_value(&table, &a, c) + self.theta_value(&table, &b, c).conj();
                    m = m.max(v.norm());
                }
            }
        }
        Ok(m)
    }

    /// `θ(j, n+k)` and `θ(n+k, j)` for `j, k ≥ 1`, which vanish.
    pub fn mixed_block_max(&self, st: &CalabiRadialState) -> Result<f64> {
        let k = self.connection_coefficients(st)?;
        let table = self.covectors();
        let n = self.n;
        let mut m: f64 = 0.0;
        for j in 1..n {
            for kk in 1..n {
                for (lo, up) in [(j, n + kk), (n + kk, j)] {
                    let w = self.theta(&k, lo, up);
                    for c in 0..4 * n {
                        m = m.max(self.theta_value(&table, &w, c).norm());
                    }
                }
            }
        }
        Ok(m)
    }

    /// Real connection coefficients. Frame derivatives are filled for the
    /// blocks with vertical lower and horizontal upper index, all of which
    /// are radial functions times a parallel coframe element.
    pub fn connection(&self, st: &CalabiRadialState) -> Result<ConnectionSample> {
        let k = self.connection_coefficients(st)?;
        let dk = ConnectionCoefficients {
            p: k.dp,
            q: k.dq,
            s: k.ds,
            im: f64::NAN,
            dp: f64::NAN,
            dq: f64::NAN,
            ds: f64::NAN,
        };
        let n = self.n;
        let big = 2 * n;
        let d = 2 * big;
        let table = self.covectors();
        let radial = 2 * n;
        let mut g = ConnectionSample::new(self.frame());
        let put = |g: &mut ConnectionSample, lo: usize, up: usize, c: usize, v: Complex64, deriv: bool| {
            let entries = [
                (2 * lo, 2 * up, v.re),
                (2 * lo, 2 * up + 1, v.im),
                (2 * lo + 1, 2 * up + 1, v.re),
                (2 * lo + 1, 2 * up, -v.im),
            ];
            for (a, b, x) in entries {
                if deriv {
                    g.set_derivative(a, b, c, radial, x);
                } else {
                    g.set(a, b, c, x);
                }
            }
        };
        for lo in 0..big {
            for up in 0..big {
                let w = self.theta(&k, lo, up);
                for c in 0..d {
                    put(&mut g, lo, up, c, self.theta_value(&table, &w, c), false);
                }
            }
        }
        for lo in n..big {
            for up in 0..n {
                let w = self.theta(&dk, lo, up);
                for c in 0..d {
                    put(&mut g, lo, up, c, self.theta_value(&table, &w, c), true);
                }
            }
        }
        Ok(g)
    }

    /// `𝓡(lower, upper)` as a sum of `ξ^α ∧ conj ξ^β` terms.
    fn curvature_form(&self, st: &CalabiRadialState, lo: usize, up: usize) -> TwoForm {
        let n = self.n;
        let c2 = 1.0 / st.q();
        let c4 = c2 * c2;
        let c6 = c4 * c2;
        let w = |c: f64, a: usize, b: usize| (re(c), self.xi(a), self.xib(b));
        let neg = |f: TwoForm| -> TwoForm { f.into_iter().map(|(c, a, b)| (-c, a, b)).collect() };
        let diag_part = |out: &mut TwoForm, s1: f64, sj: f64| {
            out.push(w(s1, 0, 0));
            out.push(w(-s1, n, n));
            for i in 1..n {
                out.push(w(sj, i, i));
                out.push(w(-sj, n + i, n + i));
            }
        };
        match (self.ix(lo), self.ix(up)) {
            (Ix::One, Ix::One) => {
                let mut out = Vec::new();
                diag_part(&mut out, 2.0 * c6, c4);
                out
            }
            (Ix::One, Ix::J(j)) => vec![w(c4, j, 0), w(-c4, n, n + j)],
            (Ix::One, Ix::NJ(j)) => vec![w(-c4, n + j, 0), w(-c4, n, j)],
            (Ix::One, Ix::N1) => vec![w(-2.0 * c6, n, 0)],
            (Ix::J(j), Ix::NJ(k)) => vec![w(-c2, n + j, k), w(-c2, n + k, j)],
            (Ix::J(j), Ix::J(k)) => {
                let mut out = vec![w(c2, k, j), w(-c2, n + j, n + k)];
                if j == k {
                    diag_part(&mut out, c4, c2);
                }
                out
            }
            (Ix::J(j), Ix::N1) => self.curvature_form(st, 0, n + j),
            (Ix::N1, Ix::N1) => neg(self.curvature_form(st, 0, 0)),
            (Ix::NJ(j), Ix::N1) => neg(self.curvature_form(st, 0, j)),
            (Ix::NJ(j), Ix::NJ(k)) => neg(self.curvature_form(st, k, j)),
            // skew-Hermitian partners
            (Ix::J(_), Ix::One) | (Ix::NJ(_), Ix::One) | (Ix::N1, Ix::One) | (Ix::N1, Ix::J(_))
            | (Ix::N1, Ix::NJ(_)) | (Ix::NJ(_), Ix::J(_)) => {
                neg(self.conj2(&self.curvature_form(st, up, lo)))
            }
        }
    }

    /// Riemann tensor of the real frame, assembled from the curvature forms
    /// with `R(e_{2μ}, e_{2ν}, ·, ·) = re 𝓡(ν, μ)` and
    /// `R(e_{2μ+1}, e_{2ν}, ·, ·) = im 𝓡(ν, μ)`.
    pub fn curvature(&self, st: &CalabiRadialState) -> RiemannSample {
        let big = 2 * self.n;
        let d = 2 * big;
        let table = self.covectors();
        let basis: Vec<Vec<f64>> = (0..d)
            .map(|a| {
                let mut e = vec![0.0; d];
                e[a] = 1.0;
                e
            })
            .collect();
        // vals[lo][up][z][w]
        let mut vals = vec![ZERO; big * big * d * d];
        for lo in 0..big {
            for up in 0..big {
                let form = self.curvature_form(st, lo, up);
                for z in 0..d {
                    for wv in 0..d {
                        let mut acc = ZERO;
                        for &(co, a, b) in &form {
                            acc += co
                                * (table.eval(a, &basis[z]) * table.eval(b, &basis[wv])
                                    - table.eval(a, &basis[wv]) * table.eval(b, &basis[z]));
                        }
                        vals[((lo * big + up) * d + z) * d + wv] = acc;
                    }
                }
            }
        }
        RiemannSample::from_fn(d, |x, y, z, w| {
            let (mu, t) = (x / 2, x % 2);
            let (nu, s) = (y / 2, y % 2);
            let v = vals[((nu * big + mu) * d + z) * d + w];
            match (s, t) {
                (0, 0) | (1, 1) => v.re,
                (0, 1) => v.im,
                _ => -v.im,
            }
        })
    }

    /// The curvature forms `𝓡(n, n)` and `−𝓡(0, 0)` evaluated on all frame
    /// pairs; their largest difference.
    pub fn antidiagonal_curvature_defect(&self, st: &CalabiRadialState) -> f64 {
        let rm = self.curvature(st);
        let n = self.n;
        let d = 4 * n;
        let mut m: f64 = 0.0;
        for z in 0..d {
            for w in 0..d {
                for (s, t) in [(0, 0), (0, 1)] {
                    let a = rm.get(2 * n + t, 2 * n + s, z, w);
                    let b = rm.get(t, s, z, w);
                    m = m.max((a + b).abs());
                }
            }
        }
        m
    }

    /// Hessian of `ψ = ρ²`, diagonal in the real frame.
    pub fn hessian_psi(&self, st: &CalabiRadialState) -> Result<DiagonalHessian> {
        let n = self.n;
        let mut diag = vec![0.0; 4 * n];
        diag[2 * n] = 2.0;
        if st.on_zero_section() {
            diag[2 * n + 1] = 2.0;
            for j in 1..n {
                diag[2 * (n + j)] = 2.0;
                diag[2 * (n + j) + 1] = 2.0;
            }
            return Ok(DiagonalHessian { diag, limit: true });
        }
        let k = self.connection_coefficients(st)?;
        let two_rho = 2.0 * st.rho;
        diag[0] = two_rho * k.p;
        diag[1] = two_rho * k.p;
        diag[2 * n + 1] = -two_rho * k.im;
        for j in 1..n {
            diag[2 * j] = two_rho * k.q;
            diag[2 * j + 1] = two_rho * k.q;
            diag[2 * (n + j)] = two_rho * k.s;
            diag[2 * (n + j) + 1] = two_rho * k.s;
        }
        Ok(DiagonalHessian { diag, limit: false })
    }

    /// `k_n = (−1)^{n(n−1)/2} (i/2)^n`.
    pub fn k_n(&self) -> Complex64 {
        let n = self.n;
        let sign = if (n * (n - 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
        (I * 0.5).powu(n as u32) * sign
    }

    fn xi_wedge(&self) -> Wedge {
        Wedge::new((1..self.n).map(|j| self.xi(j)).collect())
    }

    fn conj_wedge(&self, w: &Wedge) -> Wedge {
        w.map_labels(|l| self.conj_label(l))
    }

    fn w(&self, parts: &[Wedge]) -> Wedge {
        parts.iter().fold(Wedge::new(vec![]), |acc, p| acc.concat(p))
    }

    fn x(&self, mu: usize) -> Wedge {
        Wedge::new(vec![self.xi(mu)])
    }

    fn xb(&self, mu: usize) -> Wedge {
        Wedge::new(vec![self.xib(mu)])
    }

    fn with_conjugates_grad(&self, terms: Vec<GradTerm>) -> Vec<GradTerm> {
        let mut out = terms.clone();
        for t in terms {
            out.push(GradTerm {
                coeff: t.coeff.conj(),
                dir: self.conj_label(t.dir),
                form: self.conj_wedge(&t.form),
            });
        }
        out
    }

    fn with_conjugates_hess(&self, terms: Vec<HessTerm>) -> Vec<HessTerm> {
        let mut out = terms.clone();
        for t in terms {
            out.push(HessTerm {
                coeff: t.coeff.conj(),
                first: self.conj_label(t.first),
                second: self.conj_label(t.second),
                form: self.conj_wedge(&t.form),
            });
        }
        out
    }

    /// `∇Ω` for `Ω = k_n ξ^0 ∧ … ∧ ξ^{n-1} ∧ conj(…)`.
    pub fn grad_omega_terms(&self, st: &CalabiRadialState) -> Result<Vec<GradTerm>> {
        let k = self.connection_coefficients(st)?;
        let n = self.n;
        let kn = -self.k_n();
        let xi = self.xi_wedge();
        let xib = self.conj_wedge(&xi);
        let a_bc = st.a / (st.b * st.c);
        let mut out = vec![GradTerm {
            coeff: kn * k.p,
            dir: self.xi(0),
            form: self.w(&[self.x(n), xi.clone(), self.xb(0), xib.clone()]),
        }];
        for j in 1..n {
            let xij = xi.interior(self.xi(j)).expect("j in Ξ");
            out.push(GradTerm {
                coeff: kn * a_bc,
                dir: self.xi(j),
                form: self.w(&[self.x(n + j), xi.clone(), self.xb(0), xib.clone()]),
            });
            out.push(GradTerm {
                coeff: kn * k.q,
                dir: self.xi(j),
                form: self.w(&[self.x(0), self.x(n), xij, self.xb(0), xib.clone()]),
            });
        }
        Ok(self.with_conjugates_grad(out))
    }

    /// `∇²Ω = −k_n (I + II + III) + conjugates`.
    pub fn hess_omega_terms(&self, st: &CalabiRadialState) -> Result<Vec<HessTerm>> {
        let k = self.connection_coefficients(st)?;
        let n = self.n;
        let q = st.q();
        let p2 = k.p * k.p;
        let b2c4 = 2.0 * st.b * st.b / (q * q);
        let a2c4 = 2.0 * st.a * st.a / (q * q);
        let f2b4 = k.q * k.q;
        let ic2 = 1.0 / q;
        let xi = self.xi_wedge();
        let xib = self.conj_wedge(&xi);
        let xij = |j: usize| xi.interior(self.xi(j)).expect("j in Ξ");
        let xibj = |j: usize| self.conj_wedge(&xij(j));
        let kn = -self.k_n();
        let mut out: Vec<HessTerm> = Vec::new();
        let mut push = |coeff: Complex64, first: usize, second: usize, form: Wedge| {
            out.push(HessTerm {
                coeff: kn * coeff,
                first,
                second,
                form,
            });
        };
        let (x, xb) = (|m| self.x(m), |m| self.xb(m));
        let (lx, lxb) = (|m| self.xi(m), |m| self.xib(m));
        let js: Vec<usize> = (1..n).collect();
        let base = |lead: Wedge| self.w(&[lead, xi.clone(), xb(0), xib.clone()]);

        // I
        push(re(p2), lxb(0), lx(0), base(x(0)));
        // `ξ^{n} ∧ Ξ ∧ ∇conj(ξ^0) ∧ conj(Ξ)` contributes with a minus sign
        push(re(-p2), lxb(0), lx(0), self.w(&[x(n), xi.clone(), xb(n), xib.clone()]));
        let f1 = base(x(n));
        push(re(k.dp), self.re_label(n), lx(0), f1.clone());
        push(I * (k.p * k.im), self.im_label(n), lx(0), f1.clone());
        push(re(-p2), lx(0), lx(n), f1.clone());
        for &j in &js {
            push(re(b2c4), lx(n + j), lx(j), f1.clone());
            push(re(-a2c4), lx(j), lx(n + j), f1.clone());
            push(re(b2c4), lxb(n + j), lx(0), base(x(n + j)));
            push(re(-a2c4), lxb(j), lx(0), self.w(&[x(n), xi.clone(), xb(n + j), xib.clone()]));
            push(re(b2c4), lxb(n + j), lx(0), self.w(&[x(0), x(n), xij(j), xb(0), xib.clone()]));
            push(re(-a2c4), lxb(j), lx(0), self.w(&[x(n), xi.clone(), xb(0), xb(n), xibj(j)]));
        }

        // the derivative of `f/b² ξ^j` shared by II and III
        let bracket = |push: &mut dyn FnMut(Complex64, usize, usize), j: usize| {
            push(re(k.dq), self.re_label(n), lx(j));
            push(I * (k.q * k.im), self.im_label(n), lx(j));
            push(re(-ic2), lxb(n + j), lx(0));
            push(re(-f2b4), lx(j), lx(n));
        };

        // II
        for &j in &js {
            push(re(f2b4), lxb(j), lx(j), base(x(0)));
            push(re(-ic2), lx(n + j), lx(j), base(x(n)));
            let fj = base(x(n + j));
            bracket(&mut |c, a, b| push(c, a, b, fj.clone()), j);
            push(re(-a2c4), lxb(0), lx(j), self.w(&[x(n + j), xi.clone(), xb(n), xib.clone()]));
            for &kk in &js {
                push(re(-f2b4), lxb(kk), lx(j), self.w(&[x(n + j), xi.clone(), xb(n + kk), xib.clone()]));
                push(re(ic2), lxb(n + kk), lx(j), self.w(&[x(0), x(n + j), xij(kk), xb(0), xib.clone()]));
                push(re(f2b4), lx(kk), lx(j), self.w(&[x(n), x(n + j), xij(kk), xb(0), xib.clone()]));
                push(re(-f2b4), lxb(kk), lx(j), self.w(&[x(n + j), xi.clone(), xb(0), xb(n), xibj(kk)]));
            }
        }

        // III
        for &j in &js {
            push(re(f2b4), lxb(j), lx(j), base(x(0)));
            push(re(-ic2), lx(n + j), lx(j), base(x(n)));
            let fj = self.w(&[x(0), x(n), xij(j), xb(0), xib.clone()]);
            bracket(&mut |c, a, b| push(c, a, b, fj.clone()), j);
            push(re(-a2c4), lxb(0), lx(j), self.w(&[x(0), x(n), xij(j), xb(n), xib.clone()]));
            for &kk in &js {
                push(re(f2b4), lx(kk), lx(j), self.w(&[x(n), x(n + kk), xij(j), xb(0), xib.clone()]));
                push(re(ic2), lxb(n + kk), lx(j), self.w(&[x(0), x(n + kk), xij(j), xb(0), xib.clone()]));
                push(re(-f2b4), lxb(kk), lx(j), self.w(&[x(0), x(n), xij(j), xb(n + kk), xib.clone()]));
                push(re(-f2b4), lxb(kk), lx(j), self.w(&[x(0), x(n), xij(j), xb(0), xb(n), xibj(kk)]));
            }
        }
        Ok(self.with_conjugates_hess(out))
    }
}

/// Unitary `T` with first row `z/|z|`: `T = Uᵀ` for the complex Householder
/// unitary `U = −e^{iφ} H` sending `e_1` to `z/|z|`, where `φ = arg z_1`.
/// Smooth wherever `z_1 ≠ 0`.
pub fn unitary_gauge(z: &[Complex64]) -> Result<DMatrix<Complex64>> {
    let n = z.len();
    let r = z.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if r == 0.0 {
        return Err(LabError::Domain("unitary gauge needs z ≠ 0".into()));
    }
    let u: Vec<Complex64> = z.iter().map(|v| v / r).collect();
    let phase = if u[0].norm() > 0.0 { u[0] / u[0].norm() } else { re(1.0) };
    // H (phase e_1) = −u with w = phase e_1 + u
    let mut w = u.clone();
    w[0] += phase;
    let ww: f64 = w.iter().map(|v| v.norm_sqr()).sum();
    let wv = nalgebra::DVector::from_vec(w);
    let h = DMatrix::<Complex64>::identity(n, n) - (&wv * wv.adjoint()) * re(2.0 / ww);
    let unitary = h * (-phase);
    Ok(unitary.transpose())
}
