//! Finite-difference differential geometry on explicit coordinate charts.
//!
//! A chart supplies an orthonormal coframe in coordinate components; the
//! metric is `g = EᵀE`. Christoffel symbols come from central differences of
//! `g`, curvature from central differences of the Christoffel symbols. Nothing
//! here uses the closed-form connection or curvature of the families, so the
//! results serve as an independent check of those.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::bryant_salamon::{BSSpace, BSSpaceId};
use crate::calabi::Calabi;
use crate::geom::{det_real, RiemannSample};
use crate::stenzel::{spherical_gauge, Stenzel};
use crate::{LabError, Result};

/// Default finite-difference step.
pub const DEFAULT_STEP: f64 = 1e-4;

pub trait MetricField: Sync {
    fn dim(&self) -> usize;
    fn metric(&self, x: &[f64]) -> Result<DMatrix<f64>>;
}

/// A field with an orthonormal coframe; row `a` of the matrix is `ω^a` in
/// coordinate components.
pub trait CoframeField: MetricField {
    fn coframe(&self, x: &[f64]) -> Result<DMatrix<f64>>;
}

/// Any closure `x ↦ g(x)` as a metric field.
pub struct FnMetric<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> DMatrix<f64> + Sync> MetricField for FnMetric<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn metric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        Ok((self.f)(x))
    }
}

macro_rules! metric_from_coframe {
    ($t:ty) => {
        impl MetricField for $t {
            fn dim(&self) -> usize {
                self.dim_impl()
            }
            fn metric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
                let e = self.coframe(x)?;
                Ok(e.transpose() * e)
            }
        }
    };
}

fn check_step(h: f64) -> Result<()> {
    if !(1e-6..=1e-2).contains(&h) {
        return Err(LabError::Domain(format!("finite-difference step {h} outside [1e-6, 1e-2]")));
    }
    Ok(())
}

fn shifted(x: &[f64], k: usize, d: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    y[k] += d;
    y
}

/// `Γ^k_{ab}` stored as `data[(k * d + a) * d + b]`.
#[derive(Debug, Clone)]
pub struct Christoffel {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Christoffel {
    #[inline]
    pub fn get(&self, k: usize, a: usize, b: usize) -> f64 {
        self.data[(k * self.dim + a) * self.dim + b]
    }

    /// `Γ(X, V)^k = Γ^k_{ab} X^a V^b`, the coordinate form of `∇_X V` for
    /// constant `V`.
    pub fn apply(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|k| {
                let mut acc = 0.0;
                for a in 0..d {
                    if x[a] == 0.0 {
                        continue;
                    }
                    for b in 0..d {
                        acc += self.get(k, a, b) * x[a] * v[b];
                    }
                }
                acc
            })
            .collect()
    }
}

fn metric_checked(g: &dyn MetricField, x: &[f64]) -> Result<DMatrix<f64>> {
    let m = g.metric(x)?;
    if m.iter().any(|v| !v.is_finite()) {
        return Err(LabError::Numeric(format!("metric not finite at {x:?}")));
    }
    Ok(m)
}

/// Christoffel symbols by central differences of the metric.
pub fn christoffel_fd(g: &dyn MetricField, x: &[f64], h: f64) -> Result<Christoffel> {
    check_step(h)?;
    let d = g.dim();
    let g0 = metric_checked(g, x)?;
    let ginv = g0
        .clone()
        .try_inverse()
        .ok_or_else(|| LabError::Numeric(format!("singular metric at {x:?}")))?;
    let mut dg = Vec::with_capacity(d);
    for c in 0..d {
        let gp = metric_checked(g, &shifted(x, c, h))?;
        let gm = metric_checked(g, &shifted(x, c, -h))?;
        dg.push((gp - gm) / (2.0 * h));
    }
    let mut data = vec![0.0; d * d * d];
    for k in 0..d {
        for a in 0..d {
            for b in a..d {
                let mut acc = 0.0;
                for l in 0..d {
                    acc += ginv[(k, l)] * (dg[a][(b, l)] + dg[b][(a, l)] - dg[l][(a, b)]);
                }
                data[(k * d + a) * d + b] = 0.5 * acc;
                data[(k * d + b) * d + a] = 0.5 * acc;
            }
        }
    }
    Ok(Christoffel { dim: d, data })
}

/// Coordinate components `R(∂_a, ∂_b, ∂_c, ∂_d) = ⟨Rm(∂_c, ∂_d)∂_b, ∂_a⟩`.
pub fn riemann_fd(g: &dyn MetricField, x: &[f64], h: f64) -> Result<RiemannSample> {
    check_step(h)?;
    let d = g.dim();
    let gam = christoffel_fd(g, x, h)?;
    let mut dgam = Vec::with_capacity(d);
    for c in 0..d {
        let p = christoffel_fd(g, &shifted(x, c, h), h)?;
        let m = christoffel_fd(g, &shifted(x, c, -h), h)?;
        dgam.push(
            p.data
                .iter()
                .zip(&m.data)
                .map(|(a, b)| (a - b) / (2.0 * h))
                .collect::<Vec<f64>>(),
        );
    }
    let dg = |c: usize, k: usize, a: usize, b: usize| dgam[c][(k * d + a) * d + b];
    let g0 = metric_checked(g, x)?;
    // R^a_{bcd} = ∂_c Γ^a_{db} − ∂_d Γ^a_{cb} + Γ^a_{ce} Γ^e_{db} − Γ^a_{de} Γ^e_{cb}
    let mut up = vec![0.0; d * d * d * d];
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                for e in 0..d {
                    let mut v = dg(c, a, e, b) - dg(e, a, c, b);
                    for f in 0..d {
                        v += gam.get(a, c, f) * gam.get(f, e, b) - gam.get(a, e, f) * gam.get(f, c, b);
                    }
                    up[((a * d + b) * d + c) * d + e] = v;
                }
            }
        }
    }
    Ok(RiemannSample::from_fn(d, |a, b, c, e| {
        (0..d).map(|f| g0[(a, f)] * up[((f * d + b) * d + c) * d + e]).sum()
    }))
}

/// Frame vectors as the columns of `E⁻¹`.
pub fn frame_vectors(coframe: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    coframe
        .clone()
        .try_inverse()
        .ok_or_else(|| LabError::Numeric("singular coframe".into()))
}

/// Coordinate curvature expressed in the orthonormal frame of the chart.
pub fn riemann_in_frame(field: &dyn CoframeField, x: &[f64], h: f64) -> Result<RiemannSample> {
    let r = riemann_fd(field, x, h)?;
    Ok(r.change_frame(&frame_vectors(&field.coframe(x)?)?))
}

/// `max |Eᵀ-contracted g − I|`: how far the frame vectors are from
/// orthonormal for the metric of the field.
pub fn vielbein_defect(field: &dyn CoframeField, x: &[f64]) -> Result<f64> {
    let e = field.coframe(x)?;
    let p = frame_vectors(&e)?;
    let g = field.metric(x)?;
    let id = p.transpose() * g * p;
    Ok((id - DMatrix::identity(e.nrows(), e.nrows())).amax())
}

/// Frame curvature at steps `h`, `h/2`, `h/4`, the Richardson-extrapolated
/// value from the last two, and the ratio of successive differences (close
/// to 4 for a second-order scheme).
#[derive(Debug, Clone)]
pub struct RichardsonCurvature {
    pub coarse: RiemannSample,
    pub fine: RiemannSample,
    pub extrapolated: RiemannSample,
    pub ratio: f64,
}

pub fn riemann_richardson(field: &dyn CoframeField, x: &[f64], h: f64) -> Result<RichardsonCurvature> {
    let r1 = riemann_in_frame(field, x, h)?;
    let r2 = riemann_in_frame(field, x, h / 2.0)?;
    let r4 = riemann_in_frame(field, x, h / 4.0)?;
    let ratio = r1.max_diff(&r2) / r2.max_diff(&r4);
    let d = r4.dim();
    let extrapolated = RiemannSample::from_fn(d, |a, b, c, e| (4.0 * r4.get(a, b, c, e) - r2.get(a, b, c, e)) / 3.0);
    Ok(RichardsonCurvature {
        coarse: r2,
        fine: r4,
        extrapolated,
        ratio,
    })
}

/// Coordinate Hessian `∂²f − Γ ∂f` of a scalar function.
pub fn hessian_fd(g: &dyn MetricField, f: &dyn Fn(&[f64]) -> Result<f64>, x: &[f64], h: f64) -> Result<DMatrix<f64>> {
    check_step(h)?;
    let d = g.dim();
    let gam = christoffel_fd(g, x, h)?;
    let f0 = f(x)?;
    let mut grad = vec![0.0; d];
    for k in 0..d {
        grad[k] = (f(&shifted(x, k, h))? - f(&shifted(x, k, -h))?) / (2.0 * h);
    }
    let mut out = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let second = if a == b {
                (f(&shifted(x, a, h))? - 2.0 * f0 + f(&shifted(x, a, -h))?) / (h * h)
            } else {
                let pp = f(&shifted(&shifted(x, a, h), b, h))?;
                let pm = f(&shifted(&shifted(x, a, h), b, -h))?;
                let mp = f(&shifted(&shifted(x, a, -h), b, h))?;
                let mm = f(&shifted(&shifted(x, a, -h), b, -h))?;
                (pp - pm - mp + mm) / (4.0 * h * h)
            };
            let corr: f64 = (0..d).map(|k| gam.get(k, a, b) * grad[k]).sum();
            out[(a, b)] = second - corr;
            out[(b, a)] = second - corr;
        }
    }
    Ok(out)
}

/// `Ω = ω^0 ∧ … ∧ ω^{n-1}` built from the first `n` coframe rows.
fn omega_at(field: &dyn CoframeField, n: usize, x: &[f64], vs: &[Vec<f64>]) -> Result<f64> {
    let e = field.coframe(x)?;
    let d = e.ncols();
    let mut m = Vec::with_capacity(n * n);
    for i in 0..n {
        for v in vs {
            m.push((0..d).map(|k| e[(i, k)] * v[k]).sum::<f64>());
        }
    }
    Ok(det_real(&mut m, n))
}

fn replaced(vs: &[Vec<f64>], s: usize, w: Vec<f64>) -> Vec<Vec<f64>> {
    let mut out = vs.to_vec();
    out[s] = w;
    out
}

/// `(∇_X Ω)(v_0, …, v_{n-1})` for coordinate vectors, by central differences.
pub fn grad_omega_fd(field: &dyn CoframeField, n: usize, x: &[f64], xv: &[f64], vs: &[Vec<f64>], h: f64) -> Result<f64> {
    let gam = christoffel_fd(field, x, h)?;
    grad_omega_with(field, &gam, n, x, xv, vs, h)
}

fn grad_omega_with(
    field: &dyn CoframeField,
    gam: &Christoffel,
    n: usize,
    x: &[f64],
    xv: &[f64],
    vs: &[Vec<f64>],
    h: f64,
) -> Result<f64> {
    let d = field.dim();
    let mut deriv = 0.0;
    for a in 0..d {
        if xv[a] == 0.0 {
            continue;
        }
        let p = omega_at(field, n, &shifted(x, a, h), vs)?;
        let m = omega_at(field, n, &shifted(x, a, -h), vs)?;
        deriv += xv[a] * (p - m) / (2.0 * h);
    }
    let mut conn = 0.0;
    for s in 0..vs.len() {
        conn += omega_at(field, n, x, &replaced(vs, s, gam.apply(xv, &vs[s])))?;
    }
    Ok(deriv - conn)
}

/// `(∇²_{X,Y} Ω)(v_0, …, v_{n-1})` with `X` the outer slot.
pub fn hess_omega_fd(
    field: &dyn CoframeField,
    n: usize,
    x: &[f64],
    xv: &[f64],
    yv: &[f64],
    vs: &[Vec<f64>],
    h: f64,
) -> Result<f64> {
    let d = field.dim();
    let gam = christoffel_fd(field, x, h)?;
    let mut deriv = 0.0;
    for a in 0..d {
        if xv[a] == 0.0 {
            continue;
        }
        let xp = shifted(x, a, h);
        let xm = shifted(x, a, -h);
        let p = grad_omega_with(field, &christoffel_fd(field, &xp, h)?, n, &xp, yv, vs, h)?;
        let m = grad_omega_with(field, &christoffel_fd(field, &xm, h)?, n, &xm, yv, vs, h)?;
        deriv += xv[a] * (p - m) / (2.0 * h);
    }
    let mut total = deriv - grad_omega_with(field, &gam, n, x, &gam.apply(xv, yv), vs, h)?;
    for s in 0..vs.len() {
        total -= grad_omega_with(field, &gam, n, x, yv, &replaced(vs, s, gam.apply(xv, &vs[s])), h)?;
    }
    Ok(total)
}

/// Maps frame components to coordinate components at `x`.
pub fn frame_to_coords(field: &dyn CoframeField, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let p = frame_vectors(&field.coframe(x)?)?;
    let d = p.nrows();
    Ok((0..d).map(|k| (0..d).map(|a| p[(k, a)] * v[a]).sum()).collect())
}

/// Round sphere `S^n` of curvature `κ` in hyperspherical coordinates
/// `θ_0, …, θ_{n-1}`, with `ω̄^k = κ^{-1/2} P_k dθ_k`, `P_k = Π_{i<k} sin θ_i`.
#[derive(Debug, Clone, Copy)]
pub struct RoundSphere {
    pub n: usize,
    pub kappa: f64,
}

impl RoundSphere {
    fn dim_impl(&self) -> usize {
        self.n
    }

    fn products(theta: &[f64]) -> Vec<f64> {
        let mut p = vec![1.0; theta.len()];
        for k in 1..theta.len() {
            p[k] = p[k - 1] * theta[k - 1].sin();
        }
        p
    }

    /// Base coframe rows and the connection forms `ω̄_k^l` (rows of the
    /// returned `(k, l)` table) in the coordinates `θ`.
    pub fn structure(&self, theta: &[f64]) -> (DMatrix<f64>, Vec<Vec<Vec<f64>>>) {
        let n = self.n;
        let p = Self::products(theta);
        let s = self.kappa.sqrt();
        let mut e = DMatrix::zeros(n, n);
        for k in 0..n {
            e[(k, k)] = p[k] / s;
        }
        let mut conn = vec![vec![vec![0.0; n]; n]; n];
        for k in 0..n {
            for l in (k + 1)..n {
                let v = theta[k].cos() / theta[k].sin() * p[l] / p[k];
                conn[k][l][l] = v;
                conn[l][k][l] = -v;
            }
        }
        (e, conn)
    }

    fn check_chart(theta: &[f64]) -> Result<()> {
        let n = theta.len();
        for (k, &t) in theta.iter().enumerate() {
            let ok = if k + 1 == n { t.is_finite() } else { t > 1e-2 && t < std::f64::consts::PI - 1e-2 };
            if !ok {
                return Err(LabError::Domain(format!("θ_{k} = {t} outside the chart")));
            }
        }
        Ok(())
    }
}

impl CoframeField for RoundSphere {
    fn coframe(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        Self::check_chart(x)?;
        Ok(self.structure(x).0)
    }
}
metric_from_coframe!(RoundSphere);

/// Flat `ℝ^d` with the identity coframe.
#[derive(Debug, Clone, Copy)]
pub struct Euclidean {
    pub dim: usize,
}

impl Euclidean {
    fn dim_impl(&self) -> usize {
        self.dim
    }
}

impl CoframeField for Euclidean {
    fn coframe(&self, _x: &[f64]) -> Result<DMatrix<f64>> {
        Ok(DMatrix::identity(self.dim, self.dim))
    }
}
metric_from_coframe!(Euclidean);

/// `sinh r / r`.
fn shc(r: f64) -> f64 {
    if r.abs() < 0.5 {
        let t = r * r;
        let mut term = 1.0;
        let mut acc = 1.0;
        for k in 1..12 {
            term *= t / ((2 * k) * (2 * k + 1)) as f64;
            acc += term;
        }
        acc
    } else {
        r.sinh() / r
    }
}

/// `(r cosh r − sinh r) / r³`.
fn cosh_defect(r: f64) -> f64 {
    if r.abs() < 1.0 {
        let t = r * r;
        // Σ_{k≥1} 2k r^{2k−2} / (2k+1)!
        let mut fact = 6.0;
        let mut pow = 1.0;
        let mut acc = 0.0;
        for k in 1..14 {
            acc += (2 * k) as f64 * pow / fact;
            pow *= t;
            fact *= ((2 * k + 2) * (2 * k + 3)) as f64;
        }
        acc
    } else {
        (r * r.cosh() - r.sinh()) / (r * r * r)
    }
}

/// The `n = 2` Stenzel metric on `T*S²` in coordinates `(u, y)`: `u` is a
/// stereographic coordinate on the unit sphere, with `θ^i = λ du^i` and
/// `λ = 2/(1 + |u|²)`, and `y` are the fiber components with respect to
/// `θ`. The coframe is smooth across the zero section.
///
/// Both stereographic charts of the sphere (`z` and `w = 1/z`) give the same
/// formula, so one field serves a two-chart atlas.
#[derive(Debug, Clone, Copy, Default)]
pub struct StenzelStereoChart;

impl StenzelStereoChart {
    fn dim_impl(&self) -> usize {
        4
    }

    /// Conformal factor `λ(u)`.
    pub fn lambda(u: &[f64]) -> f64 {
        2.0 / (1.0 + u[0] * u[0] + u[1] * u[1])
    }
}

impl CoframeField for StenzelStereoChart {
    fn coframe(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let (u, y) = x.split_at(2);
        let r = (y[0] * y[0] + y[1] * y[1]).sqrt();
        if !r.is_finite() || r > crate::stenzel::R_MAX {
            return Err(LabError::Numeric(format!("fiber radius {r} outside the chart")));
        }
        let lam = Self::lambda(u);
        let ch = r.cosh();
        let c = ch.sqrt();
        let s = shc(r);
        // |D|² coefficient b²/r² and the extra (y·D)² coefficient (c² − b²/r²)/r²
        let f1 = s * s / ch;
        let kap = cosh_defect(r) * (ch + s) / ch;
        let sf = f1.sqrt();
        let q = kap / (c + sf);
        // ω̄_0^1 = λ (u_1 du^0 − u_0 du^1)
        let conn = [lam * u[1], -lam * u[0], 0.0, 0.0];
        let mut d = [[0.0; 4]; 2];
        for k in 0..4 {
            d[0][k] = -y[1] * conn[k];
            d[1][k] = y[0] * conn[k];
        }
        d[0][2] += 1.0;
        d[1][3] += 1.0;
        let mut e = DMatrix::zeros(4, 4);
        e[(0, 0)] = c * lam;
        e[(1, 1)] = c * lam;
        for k in 0..4 {
            let yd = y[0] * d[0][k] + y[1] * d[1][k];
            for nu in 0..2 {
                e[(2 + nu, k)] = sf * d[nu][k] + q * yd * y[nu];
            }
        }
        Ok(e)
    }
}
metric_from_coframe!(StenzelStereoChart);

/// The Stenzel metric on `T*S^n` in coordinates `(θ, y)`: hyperspherical
/// base angles and the fiber components `y_ν` with respect to `ω̄^ν`.
#[derive(Debug, Clone)]
pub struct StenzelChart {
    pub stenzel: Stenzel,
}

impl StenzelChart {
    pub fn new(n: usize) -> Result<Self> {
        Ok(Self {
            stenzel: Stenzel::new(n)?,
        })
    }

    fn dim_impl(&self) -> usize {
        2 * self.stenzel.n
    }

    /// Fiber radius `r = |y|` of a chart point.
    pub fn radius(&self, x: &[f64]) -> f64 {
        let n = self.stenzel.n;
        x[n..].iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl CoframeField for StenzelChart {
    fn coframe(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.stenzel.n;
        let (theta, y) = x.split_at(n);
        RoundSphere::check_chart(theta)?;
        let r = self.radius(x);
        if r < 1e-2 {
            return Err(LabError::Domain("Stenzel chart excludes r < 1e-2".into()));
        }
        let sphere = RoundSphere { n, kappa: 1.0 };
        let (base, conn) = sphere.structure(theta);
        let t = spherical_gauge(y)?;
        let st = self.stenzel.radial_state(r)?;
        // D_ν = dy_ν − y_γ ω̄_ν^γ
        let mut dvert = DMatrix::zeros(n, 2 * n);
        for nu in 0..n {
            dvert[(nu, n + nu)] = 1.0;
            for g in 0..n {
                for k in 0..n {
                    dvert[(nu, k)] -= y[g] * conn[nu][g][k];
                }
            }
        }
        let mut e = DMatrix::zeros(2 * n, 2 * n);
        for mu in 0..n {
            let (ch, cv) = if mu == 0 { (st.c, st.c) } else { (st.a, st.b / r) };
            for nu in 0..n {
                for k in 0..n {
                    e[(mu, k)] += ch * t[(mu, nu)] * base[(nu, k)];
                }
                for k in 0..2 * n {
                    e[(n + mu, k)] += cv * t[(mu, nu)] * dvert[(nu, k)];
                }
            }
        }
        Ok(e)
    }
}
metric_from_coframe!(StenzelChart);

/// The Calabi metric on `T*CP^1` in coordinates `(θ, φ, x, y)` with
/// `z = x − i y` and the base `CP^1` the sphere of radius `1/2`.
#[derive(Debug, Clone, Copy)]
pub struct CalabiChart;

impl CalabiChart {
    fn dim_impl(&self) -> usize {
        4
    }
}

impl CoframeField for CalabiChart {
    fn coframe(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let (th, ph, x, y) = (p[0], p[1], p[2], p[3]);
        RoundSphere::check_chart(&[th, ph])?;
        let z = Complex64::new(x, -y);
        let r = z.norm();
        if r < 1e-2 {
            return Err(LabError::Domain("Calabi chart excludes r < 1e-2".into()));
        }
        let st = Calabi::new(1)?.radial_state(r)?;
        let i = Complex64::new(0.0, 1.0);
        // rows in (dθ, dφ, dx, dy)
        let theta1 = [Complex64::new(0.5, 0.0), i * 0.5 * th.sin(), 0.0.into(), 0.0.into()];
        let conn = [0.0.into(), i * th.cos(), 0.0.into(), 0.0.into()];
        let dz = [0.0.into(), 0.0.into(), Complex64::new(1.0, 0.0), -i];
        let sigma1: Vec<Complex64> = theta1.iter().map(|v| z / r * v).collect();
        let sigma2: Vec<Complex64> = (0..4).map(|k| z.conj() / r * (dz[k] - z * conn[k])).collect();
        let mut e = DMatrix::zeros(4, 4);
        for k in 0..4 {
            e[(0, k)] = st.c * sigma1[k].re;
            e[(1, k)] = st.c * sigma1[k].im;
            e[(2, k)] = st.h * sigma2[k].re;
            e[(3, k)] = st.f / r * sigma2[k].im;
        }
        Ok(e)
    }
}
metric_from_coframe!(CalabiChart);

/// A Bryant-Salamon metric over a round sphere, in coordinates `(θ, y)`
/// with `ω^j = α ω̄^j` and `ω^{n+μ} = β (dy^μ + A^μ_ν y^ν)`, the bundle
/// connection being `A = σ(ω̄)` for the fiber action read off the `F` table.
#[derive(Debug, Clone, Copy)]
pub struct BSChart {
    pub space: BSSpace,
}

impl BSChart {
    pub fn new(space: BSSpace) -> Result<Self> {
        if space.id == BSSpaceId::AsdCP2 {
            return Err(LabError::Domain("no sphere chart for the CP² base".into()));
        }
        Ok(Self { space })
    }

    fn dim_impl(&self) -> usize {
        self.space.n + self.space.m
    }
}

impl CoframeField for BSChart {
    fn coframe(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let (n, m) = (self.space.n, self.space.m);
        let (theta, y) = x.split_at(n);
        RoundSphere::check_chart(theta)?;
        let sphere = RoundSphere {
            n,
            kappa: self.space.kappa,
        };
        let (base, conn) = sphere.structure(theta);
        let st = self.space.state_at(y)?;
        let d = n + m;
        let mut e = DMatrix::zeros(d, d);
        for j in 0..n {
            for k in 0..n {
                e[(j, k)] = st.alpha * base[(j, k)];
            }
        }
        // A^μ_ν(∂_k) = σ(W_k) with W_k[(i, j)] = ω̄_j^i(∂_k)
        for k in 0..n {
            let w = DMatrix::from_fn(n, n, |i, j| conn[j][i][k]);
            let a = self.space.fiber_action(&w);
            for mu in 0..m {
                e[(n + mu, k)] = st.beta * (0..m).map(|nu| a[(mu, nu)] * y[nu]).sum::<f64>();
            }
        }
        for mu in 0..m {
            e[(n + mu, n + mu)] = st.beta;
        }
        Ok(e)
    }
}
metric_from_coframe!(BSChart);
