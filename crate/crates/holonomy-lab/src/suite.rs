//! Verification suites and parameter sweeps for the three families.
//!
//! A suite is a list of named [`Check`]s, each comparing one measured
//! quantity with a bound. All sampling is seeded and parallel evaluations
//! collect in input order, so a report does not depend on the thread count.

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::bryant_salamon::{BSSpace, BSSpaceId};
use crate::calabi::Calabi;
use crate::geom::{
    check_riemann_symmetries, comass_sample, linear_estimates, ricci_contract, split_plane, ComplexStructure,
    ConnectionSample, Covectors, FrameIndexSet, GradTerm, HessTerm, RiemannSample, TangentPlaneSplit,
};
use crate::oracle::{
    frame_to_coords, grad_omega_fd, hess_omega_fd, riemann_richardson, BSChart, CalabiChart, CoframeField,
    StenzelChart,
};
use crate::stenzel::Stenzel;
use crate::{LabError, Result};

/// Largest total dimension for which the suite runs the finite-difference
/// oracle; its cost grows like `dim⁶`.
const ORACLE_MAX_DIM: usize = 8;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    /// Passes when `value < bound`.
    pub fn below(name: impl Into<String>, value: f64, bound: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value,
            bound,
            passed: value < bound,
            detail: detail.into(),
        }
    }

    /// Passes when `value > bound`.
    pub fn above(name: impl Into<String>, value: f64, bound: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value,
            bound,
            passed: value > bound,
            detail: detail.into(),
        }
    }

    /// Passes when `value == 0.0` exactly.
    pub fn zero(name: impl Into<String>, value: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value,
            bound: 0.0,
            passed: value == 0.0,
            detail: detail.into(),
        }
    }

    pub fn holds(name: impl Into<String>, ok: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value: if ok { 0.0 } else { 1.0 },
            bound: 0.0,
            passed: ok,
            detail: detail.into(),
        }
    }

    fn failed(name: impl Into<String>, err: &LabError) -> Self {
        Self::holds(name, false, format!("error: {err}"))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub family: String,
    pub checks: Vec<Check>,
    /// Empirical constants reported by the sweeps.
    pub constants: Vec<(String, f64)>,
    pub seconds: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.family);
        for c in &self.checks {
            let tag = if c.passed { "ok  " } else { "FAIL" };
            let _ = writeln!(out, "  {tag} {:<28} {:>12.3e} (bound {:.1e})  {}", c.name, c.value, c.bound, c.detail);
        }
        for (k, v) in &self.constants {
            let _ = writeln!(out, "  const {k} = {v:.6}");
        }
        let _ = writeln!(out, "  {} of {} checks passed in {:.2} s", self.checks.len() - self.failures().len(), self.checks.len(), self.seconds);
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteOptions {
    /// Points per radial grid, at least 100.
    pub grid: usize,
    /// Bound on closed-form identity residuals.
    pub tol: f64,
    /// Bound on finite-difference residuals.
    pub fd_tol: f64,
    pub fd_step: f64,
    /// Random planes and (point, plane) pairs per sampled check.
    pub samples: usize,
    pub seed: u64,
    pub oracle: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            grid: 100,
            tol: 1e-10,
            fd_tol: 1e-6,
            fd_step: 1e-4,
            samples: 10_000,
            seed: 0,
            oracle: true,
        }
    }
}

impl SuiteOptions {
    pub fn validate(&self) -> Result<()> {
        if self.grid < 2 {
            return Err(LabError::Config("grid needs at least 2 points".into()));
        }
        if !(self.tol > 0.0 && self.fd_tol > 0.0 && self.fd_step > 0.0) {
            return Err(LabError::Config("tolerances and steps must be positive".into()));
        }
        if self.samples < 2 {
            return Err(LabError::Config("samples must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum Family {
    Stenzel(Stenzel),
    Calabi(Calabi),
    BryantSalamon(BSSpace),
}

impl Family {
    pub fn stenzel(n: usize) -> Result<Self> {
        Ok(Self::Stenzel(Stenzel::new(n)?))
    }

    pub fn calabi(n: usize) -> Result<Self> {
        Ok(Self::Calabi(Calabi::new(n)?))
    }

    pub fn bryant_salamon(id: BSSpaceId, kappa: f64) -> Result<Self> {
        Ok(Self::BryantSalamon(BSSpace::new(id, kappa)?))
    }

    pub fn label(&self) -> String {
        match self {
            Self::Stenzel(s) => format!("stenzel n={}", s.n),
            Self::Calabi(c) => format!("calabi n={}", c.n),
            Self::BryantSalamon(b) => format!("bs {} kappa={}", b.id.name(), b.kappa),
        }
    }

    pub fn frame(&self) -> FrameIndexSet {
        match self {
            Self::Stenzel(s) => s.frame(),
            Self::Calabi(c) => c.frame(),
            Self::BryantSalamon(b) => b.frame(),
        }
    }

    fn complex_structure(&self) -> Option<ComplexStructure> {
        match self {
            Self::Stenzel(s) => Some(s.complex_structure()),
            Self::Calabi(c) => Some(c.complex_structure()),
            Self::BryantSalamon(_) => None,
        }
    }

    fn covectors(&self) -> Covectors {
        match self {
            Self::Stenzel(s) => s.covectors(),
            Self::Calabi(c) => c.covectors(),
            Self::BryantSalamon(b) => b.covectors(),
        }
    }
}

pub fn linspace_open(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|i| lo + (hi - lo) * i as f64 / count as f64).collect()
}

pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![hi];
    }
    (0..count)
        .map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64))
        .collect()
}

fn unit(d: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[i] = 1.0;
    v
}

fn random_direction<R: Rng>(m: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

/// Runs every check group for `family`.
pub fn verify(family: &Family, opts: &SuiteOptions) -> Result<SuiteReport> {
    opts.validate()?;
    let start = Instant::now();
    type Group = fn(&Family, &SuiteOptions) -> (Vec<Check>, Vec<(String, f64)>);
    let groups: [Group; 8] = [
        identity_checks,
        curvature_checks,
        oracle_checks,
        hessian_checks,
        distance_checks,
        comass_checks,
        tilt_bound_checks,
        structure_checks,
    ];
    let results: Vec<(Vec<Check>, Vec<(String, f64)>)> = groups.par_iter().map(|g| g(family, opts)).collect();
    let mut checks = Vec::new();
    let mut constants = Vec::new();
    for (c, k) in results {
        checks.extend(c);
        constants.extend(k);
    }
    Ok(SuiteReport {
        family: family.label(),
        checks,
        constants,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Relations among the radial coefficient functions, in closed form and by
/// central differences.
pub fn identity_checks(family: &Family, opts: &SuiteOptions) -> (Vec<Check>, Vec<(String, f64)>) {
    let mut out = Vec::new();
    match family {
        Family::Stenzel(st) => {
            let closed: Result<f64> = log_grid(1e-4, 3.0, opts.grid)
                .into_iter()
                .map(|r| Ok(st.identity_residual(&st.radial_state(r)?)?.max()))
                .try_fold(0.0_f64, |m, v: Result<f64>| v.map(|v| m.max(v)));
            out.push(match closed {
                Ok(v) => Check::below("identities.closed_form", v, opts.tol, "log r-grid in [1e-4, 3]"),
                Err(e) => Check::failed("identities.closed_form", &e),
            });
            // steps scale with ρ; residuals relative to max(1, |derivative|)
            let fd: Result<f64> = log_grid(1e-2, 3.0, opts.grid)
                .into_iter()
                .map(|r| {
                    let s = st.radial_state(r)?;
                    let h = opts.fd_step * s.rho.min(1.0);
                    let res = st.derivative_residual(&s, h)?;
                    let scale = s.conn_a_dot.abs().max(s.conn_b_dot.abs()).max(s.conn_c_dot.abs()).max(1.0);
                    Ok(res.max() / scale)
                })
                .try_fold(0.0_f64, |m, v: Result<f64>| v.map(|v| m.max(v)));
            out.push(match fd {
                Ok(v) => Check::below("identities.finite_difference", v, opts.fd_tol, "derivatives in rho, log r-grid in [1e-2, 3]"),
                Err(e) => Check::failed("identities.finite_difference", &e),
            });
        }
        Family::Calabi(cal) => {
            let res: Result<(f64, f64)> = log_grid(1e-2, 3.0, opts.grid).into_iter().try_fold((0.0_f64, 0.0_f64), |(a, b), r| {
                let hk = cal.hk_system_residual(&cal.radial_state(r)?, opts.fd_step * r.min(1.0))?;
                let scale = (2.0 * r).cosh();
                Ok((a.max(hk.max_closed_form() / scale), b.max(hk.max_finite_difference() / scale)))
            });
            match res {
                Ok((c, f)) => {
                    out.push(Check::below("identities.closed_form", c, opts.tol, "hyperkahler system, log r-grid in [1e-2, 3]"));
                    out.push(Check::below("identities.finite_difference", f, opts.fd_tol, "hyperkahler system by central differences"));
                }
                Err(e) => out.push(Check::failed("identities", &e)),
            }
        }
        Family::BryantSalamon(sp) => {
            let mut grid = vec![0.0];
            grid.extend(linspace_open(0.0, 5.0, opts.grid));
            match sp.relation_checks(&grid, opts.fd_step * 0.1) {
                Ok(rep) => {
                    let closed = rep.ode_alpha.max(rep.ode_beta).max(rep.ratio_identity);
                    out.push(Check::below("identities.closed_form", closed, opts.tol, "first-order system and ratio identity on s in [0, 5]"));
                    out.push(Check::below("identities.finite_difference", rep.beta_over_alpha2_fd, opts.fd_tol, "d(beta/alpha^2)/ds"));
                    out.push(Check::holds(
                        "identities.hessian_condition",
                        rep.hessian_condition_holds(),
                        format!("min alpha' = {:.3e}, min beta - 2s|beta'| = {:.3e}", rep.min_dalpha, rep.min_beta_margin),
                    ));
                }
                Err(e) => out.push(Check::failed("identities", &e)),
            }
        }
    }
    (out, vec![])
}

/// Closed-form curvature at nine points per family.
pub fn curvature_samples(family: &Family) -> Result<Vec<(String, RiemannSample)>> {
    match family {
        Family::Stenzel(st) => [0.01, 0.05, 0.1, 0.3, 0.5, 0.9, 1.5, 2.2, 3.0]
            .iter()
            .map(|&r| Ok((format!("r={r}"), st.curvature(&st.radial_state(r)?)?)))
            .collect(),
        Family::Calabi(cal) => [0.0, 0.01, 0.1, 0.3, 0.5, 0.9, 1.5, 2.2, 3.0]
            .iter()
            .map(|&r| Ok((format!("r={r}"), cal.curvature(&cal.radial_state(r)?))))
            .collect(),
        Family::BryantSalamon(sp) => {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            [0.0, 0.01, 0.1, 0.3, 0.5, 1.0, 2.0, 3.0, 5.0]
                .iter()
                .map(|&s: &f64| {
                    let y: Vec<f64> = random_direction(sp.m, &mut rng).into_iter().map(|v| v * s.sqrt()).collect();
                    Ok((format!("s={s}"), sp.curvature(&y)?))
                })
                .collect()
        }
    }
}

fn mixed_odd_max(r: &RiemannSample, frame: FrameIndexSet) -> f64 {
    // R(H,V,V,V) and R(V,H,H,H)
    let d = frame.dim();
    let mut worst: f64 = 0.0;
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                for e in 0..d {
                    let hs = [a, b, c, e].iter().filter(|&&i| frame.is_horizontal(i)).count();
                    if hs == 1 || hs == 3 {
                        worst = worst.max(r.get(a, b, c, e).abs());
                    }
                }
            }
        }
    }
    worst
}

pub fn curvature_checks(family: &Family, _opts: &SuiteOptions) -> (Vec<Check>, Vec<(String, f64)>) {
    let samples = match curvature_samples(family) {
        Ok(s) => s,
        Err(e) => return (vec![Check::failed("curvature", &e)], vec![]),
    };
    let j = family.complex_structure();
    let frame = family.frame();
    let mut ric: f64 = 0.0;
    let mut sym: f64 = 0.0;
    let mut odd: f64 = 0.0;
    let mut worst_at = String::new();
    for (label, r) in &samples {
        let v = ricci_contract(r).amax();
        if v >= ric {
            worst_at = label.clone();
        }
        ric = ric.max(v);
        sym = sym.max(check_riemann_symmetries(r, j.as_ref()).max());
        odd = odd.max(mixed_odd_max(r, frame));
    }
    let pts = format!("{} points, worst at {worst_at}", samples.len());
    (
        vec![
            Check::below("curvature.ricci", ric, 1e-8, pts),
            Check::below("curvature.symmetries", sym, 1e-9, if j.is_some() { "with J-invariance" } else { "" }),
            Check::zero("curvature.hvvv_vhhh", odd, "components with one or three horizontal slots"),
        ],
        vec![],
    )
}

/// Chart point and closed-form data for the oracle comparison, when a chart
/// exists for this family.
fn oracle_setup(family: &Family) -> Result<Option<(Box<dyn CoframeField>, Vec<f64>, RiemannSample, ConnectionSample)>> {
    match family {
        Family::Stenzel(st) => {
            let n = st.n;
            let mut x: Vec<f64> = (0..n).map(|i| 1.1 + 0.1 * i as f64).collect();
            x[n - 1] = 0.4;
            let y = [0.5, 0.3, -0.2, 0.25, 0.1];
            let mut fib: Vec<f64> = (0..n).map(|i| y[i % y.len()]).collect();
            let r: f64 = fib.iter().map(|v| v * v).sum::<f64>().sqrt();
            fib.iter_mut().for_each(|v| *v *= 0.8 / r);
            x.extend(fib);
            let s = st.radial_state(0.8)?;
            Ok(Some((Box::new(StenzelChart::new(n)?), x, st.curvature(&s)?, st.connection(&s))))
        }
        Family::Calabi(cal) if cal.n == 1 => {
            let x = vec![1.1, 0.4, 0.3, 0.2];
            let s = cal.radial_state(0.13f64.sqrt())?;
            Ok(Some((Box::new(CalabiChart), x, cal.curvature(&s), cal.connection(&s)?)))
        }
        Family::BryantSalamon(sp) if sp.id != BSSpaceId::AsdCP2 => {
            let mut x: Vec<f64> = (0..sp.n).map(|i| 1.1 + 0.2 * i as f64).collect();
            x[sp.n - 1] = 0.4;
            let fib: Vec<f64> = [0.2, 0.1, -0.3, 0.2, 0.15].iter().take(sp.m).copied().collect();
            x.extend(fib.iter());
            Ok(Some((Box::new(BSChart::new(*sp)?), x, sp.curvature(&fib)?, sp.connection_sample(&fib)?)))
        }
        _ => Ok(None),
    }
}

pub fn oracle_checks(family: &Family, opts: &SuiteOptions) -> (Vec<Check>, Vec<(String, f64)>) {
    if !opts.oracle {
        return (vec![], vec![]);
    }
    if family.frame().dim() > ORACLE_MAX_DIM {
        return (vec![], vec![]);
    }
    let setup = match oracle_setup(family) {
        Ok(Some(s)) => s,
        Ok(None) => return (vec![], vec![]),
        Err(e) => return (vec![Check::failed("oracle", &e)], vec![]),
    };
    let (field, x, closed, conn) = setup;
    let mut out = Vec::new();
    match riemann_richardson(field.as_ref(), &x, 1e-2) {
        Ok(rc) => {
            let rel = rc.extrapolated.max_diff(&closed) / closed.max_abs();
            out.push(Check::below("oracle.riemann", rel, 1e-4, "relative, Richardson-extrapolated"));
            out.push(Check::below("oracle.order", (rc.ratio - 4.0).abs(), 0.5, format!("error ratio {:.3} for halved step", rc.ratio)));
        }
        Err(e) => out.push(Check::failed("oracle.riemann", &e)),
    }
    let n = family.frame().n;
    let d = family.frame().dim();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x0a11);
    let vs: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut v = unit(d, i);
            v.iter_mut().for_each(|a| *a += 0.3 * rng.gen_range(-1.0..1.0));
            v
        })
        .collect();
    let xf: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let derivs = || -> Result<(f64, f64, f64, f64)> {
        let vc: Vec<Vec<f64>> = vs.iter().map(|v| frame_to_coords(field.as_ref(), &x, v)).collect::<Result<_>>()?;
        let xc = frame_to_coords(field.as_ref(), &x, &xf)?;
        let refs: Vec<&[f64]> = vs.iter().map(|v| v.as_slice()).collect();
        let g1 = conn.grad_omega(&xf, &refs);
        let g2 = grad_omega_fd(field.as_ref(), n, &x, &xc, &vc, 1e-3)?;
        let h1 = conn.hess_trace(&vs);
        let mut h2 = 0.0;
        for v in &vc {
            h2 += hess_omega_fd(field.as_ref(), n, &x, v, v, &vc, 1e-3)?;
        }
        Ok((g1, g2, h1, h2))
    };
    match derivs() {
        Ok((g1, g2, h1, h2)) => {
            let e = ((g1 - g2).abs() / g1.abs().max(1e-2)).max((h1 - h2).abs() / h1.abs().max(1e-2));
            out.push(Check::below("oracle.omega_derivatives", e, 1e-3, format!("grad {g1:.6} vs {g2:.6}, trace {h1:.6} vs {h2:.6}")));
        }
        Err(e) => out.push(Check::failed("oracle.omega_derivatives", &e)),
    }
    (out, vec![])
}

pub fn hessian_checks(family: &Family, opts: &SuiteOptions) -> (Vec<Check>, Vec<(String, f64)>) {
    let mut out = Vec::new();
    match family {
        Family::Stenzel(_) | Family::Calabi(_) => {
            let fixed = family.frame().n;
            let res: Result<(f64, bool)> = linspace_open(0.0, 2.0, opts.grid).into_iter().try_fold((f64::INFINITY, true), |(m, ok), r| {
                let h = match family {
                    Family::Stenzel(st) => st.hessian_psi(&st.radial_state(r)?),
                    Family::Calabi(cal) => cal.hessian_psi(&cal.radial_state(r)?)?,
                    Family::BryantSalamon(_) => unreachable!(),
                };
                Ok((m.min(h.min()), ok && h.diag[fixed] == 2.0))
            });
            match res {
                Ok((min, fixed_ok)) => {
                    out.push(Check::above("hessian.min_eigenvalue", min, 0.0, "r in (0, 2]"));
                    out.push(Check::holds("hessian.vertical_entry", fixed_ok, "radial vertical entry equals 2 exactly"));
                }
                Err(e) => out.push(Check::failed("hessian", &e)),
            }
        }
        Family::BryantSalamon(sp) => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x4e55);
            let res: Result<(f64, f64)> = linspace_open(0.0, 5.0, opts.grid).into_iter().try_fold((f64::INFINITY, f64::INFINITY), |(m, margin), s| {
                let y: Vec<f64> = random_direction(sp.m, &mut rng).into_iter().map(|v| v * s.sqrt()).collect();
                let h = sp.hessian_s(&y)?;
                let min = h.min_eigenvalue();
                Ok((m.min(min), margin.min(min / h.bound - 1.0)))
            });
            match res {
                Ok((min, margin)) => {
                    out.push(Check::above("hessian.min_eigenvalue", min, 0.0, "s in (0, 5]"));
                    out.push(Check::above("hessian.lower_bound", margin, -1e-12, "min eigenvalue over explicit lower bound, minus 1"));
                }
                Err(e) => out.push(Check::failed("hessian", &e)),
            }
            match sp.hessian_s(&vec![0.0; sp.m]) {
                Ok(h) => {
                    let target = 2.0 / (sp.beta0 * sp.beta0);
                    let dev = (0..sp.n + sp.m)
                        .flat_map(|a| (0..sp.n + sp.m).map(move |b| (a, b)))
                        .map(|(a, b)| {
                            let want = if a == b && a >= sp.n { target } else { 0.0 };
                            (h.matrix[a][b] - want).abs()
                        })
                        .fold(0.0, f64::max);
                    out.push(Check::below("hessian.zero_section", dev, 1e-14, "s = 0 gives 2/beta(0)^2 on the fiber and 0 on the base"));
                }
                Err(e) => out.push(Check::failed("hessian.zero_section", &e)),
            }
        }
    }
    (out, vec![])
}

/// Sign and two-sided bounds of `A, B, C` near the zero section.
pub fn distance_checks(family: &Family, opts: &SuiteOptions) -> (Vec<Check>, Vec<(String, f64)>) {
    let Family::Stenzel(st) = family else {
        return (vec![], vec![]);
    };
    let nf = st.n as f64;
    let grid = linspace_open(0.0, 1.0, opts.grid + 1);
    let grid = &grid[..opts.grid];
    let mut out = Vec::new();
    let mut consts = Vec::new();
    match st.coefficient_sweep(grid) {
        Ok(rep) => {
            out.push(Check::holds("coefficients.negative", rep.all_negative, "A, B, C < 0 on rho in (0, 1)"));
            out.push(Check::holds("coefficients.band", rep.k_empirical.is_finite(), format!("K = {:.4}", rep.k_empirical)));
            consts.push(("K_coefficients".into(), rep.k_empirical));
        }
        Err(e) => out.push(Check::failed("coefficients", &e)),
    }
    match st.radial_state_at_rho(1e-3) {
        Ok(s) => {
            let dev = (s.conn_a.abs() / s.rho / (nf / (nf + 2.0)) - 1.0)
                .abs()
                .max((s.conn_c.abs() / s.rho / (2.0 / (nf + 2.0)) - 1.0).abs())
                .max((s.conn_b.abs() * s.rho - 1.0).abs());
            out.push(Check::below("coefficients.limits", dev, 0.01, "relative deviation from n/(n+2), 2/(n+2), 1 at rho = 1e-3"));
        }
        Err(e) => out.push(Check::failed("coefficients.limits", &e)),
    }
    (out, consts)
}

/// An oriented `n`-plane close to horizontal: `e_i + tilt·noise`.
pub fn tilted_plane<R: Rng>(frame: FrameIndexSet, tilt: f64, rng: &mut R) -> Vec<Vec<f64>> {
    (0..frame.n)
        .map(|i| {
            let mut v = unit(frame.dim(), i);
            for a in v.iter_mut() {
                *a += tilt * rng.gen_range(-1.0..1.0);
            }
            v
        })
        .collect()
}

/// A graphical plane with log-uniform tilt, or with probability 1/20 a
/// horizontal plane in a random gauge.
fn sample_plane<R: Rng>(frame: FrameIndexSet, rng: &mut R) -> TangentPlaneSplit {
    if rng.gen_bool(0.05) {
        let n = frame.n;
        let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal)).qr().q();
        let basis: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let mut v = vec![0.0; frame.dim()];
                for i in 0..n {
                    v[i] = g[(i, j)];
                }
                v
            })
            .collect();
        if let Ok(sp) = split_plane(&basis, frame) {
            return sp;
        }
    }
    loop {
        let tilt = 10f64.powf(rng.gen_range(-3.0..0.3));
        if let Ok(sp) = split_plane(&tilted_plane(frame, tilt, rng), frame) {
            return sp;
        }
    }
}

pub fn comass_checks(family: &Family, opts: &SuiteOptions) -> (Vec<Check>, Vec<(String, f64)>) {
    let frame = family.frame();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xc0a5);
    let mut max_omega = f64::NEG_INFINITY;
    let mut near_one_ok = true;
    for _ in 0..opts.samples {
        let (omega, split) = comass_sample(frame, &mut rng);
        max_omega = max_omega.max(omega);
        if omega >= 1.0 - 1e-12 {
            near_one_ok &= split.map(|s| s.s_frak < 1e-6).unwrap_or(false);
        }
    }
    let planes: Vec<TangentPlaneSplit> = (0..opts.samples).map(|_| sample_plane(frame, &mut rng)).collect();
    let (worst_margin, tilt_ratio) = planes
        .par_iter()
        .map(|sp| {
            let margin = linear_estimates(sp).worst_margin();
            let eps = 1.0 - sp.omega();
            let ratio = if eps > 0.0 && eps < 0.5 { sp.s_frak / (2.0 * eps.sqrt()) } else { 0.0 };
            (margin, ratio)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((f64::NEG_INFINITY, 0.0_f64), |(m, t), (a, b)| (m.max(a), t.max(b)));
    (
        vec![
            Check::below("comass.max_omega", max_omega, 1.0 + 1e-12, format!("{} Haar-random planes", opts.samples)),
            Check::holds("comass.equality_only_horizontal", near_one_ok, "Omega >= 1 - 1e-12 only when max |sin theta| < 1e-6"),
            Check::below("comass.linear_estimates", worst_margin, 1e-12, format!("worst lhs - bound over {} graphical planes", opts.samples)),
            Check::below("comass.tilt_from_omega", tilt_ratio, 1.0, "max s / (2 sqrt(eps)) where *Omega = 1 - eps > 1/2"),
        ],
        vec![],
    )
}

/// One evaluation of the tilt bounds: distance data, plane tilt, gradient
/// norm on the plane and the Hessian trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundSample {
    /// `ρ` for Stenzel and Calabi, `√s` for Bryant-Salamon.
    pub dist: f64,
    pub s_frak: f64,
    pub grad_norm: f64,
    pub trace: f64,
}

impl BoundSample {
    fn psi(&self) -> f64 {
        self.dist * self.dist
    }

    /// Smallest `K` with `|∇Ω| ≤ K dist`, `trace > −K(ψ + 𝔰²)` and
    /// `trace < K𝔰² − ψ/K`.
    pub fn k_required(&self) -> (f64, f64, f64) {
        let psi = self.psi();
        let s2 = self.s_frak * self.s_frak;
        let v = self.trace;
        let kg = if self.grad_norm == 0.0 { 0.0 } else { self.grad_norm / self.dist };
        let kl = (-v / (psi + s2)).max(0.0);
        let disc = (v * v + 4.0 * s2 * psi).sqrt();
        let ku = if v <= 0.0 {
            if disc - v == 0.0 {
                f64::INFINITY
            } else {
                2.0 * psi / (disc - v)
            }
        } else if s2 > 0.0 {
            (v + disc) / (2.0 * s2)
        } else {
            f64::INFINITY
        };
        (kg, kl, ku)
    }

    pub fn satisfies(&self, k: f64) -> bool {
        let psi = self.psi();
        let s2 = self.s_frak * self.s_frak;
        self.grad_norm <= k * self.dist && self.trace > -k * (psi + s2) && self.trace < k * s2 - psi / k
    }
}

/// Closed-form `∇Ω` and `∇²Ω` terms at one sampled point.
struct PointTerms {
    dist: f64,
    grad: Vec<GradTerm>,
    hess: Vec<HessTerm>,
}

fn point_terms(family: &Family, u: f64, dir: &[f64]) -> Result<PointTerms> {
    // u ∈ (0, 1) picks the distance log-uniformly in (1e-3, 1)
    let t = 10f64.powf(-3.0 * (1.0 - u));
    match family {
        Family::Stenzel(st) => {
            let r = t * st.r_of_rho(1.0)?;
            let s = st.radial_state(r)?;
            Ok(PointTerms {
                dist: s.rho,
                grad: st.grad_omega_terms(&s),
                hess: st.hess_omega_terms(&s),
            })
        }
        Family::Calabi(cal) => {
            let r = t * Calabi::r_of_rho(1.0)?;
            let s = cal.radial_state(r)?;
            Ok(PointTerms {
                dist: s.rho,
                grad: cal.grad_omega_terms(&s)?,
                hess: cal.hess_omega_terms(&s)?,
            })
        }
        Family::BryantSalamon(sp) => {
            let y: Vec<f64> = dir.iter().map(|v| v * t).collect();
            Ok(PointTerms {
                dist: t,
                grad: sp.grad_omega_terms(&y)?,
                hess: sp.hess_omega_terms(&y)?,
            })
        }
    }
}

/// Evaluates `samples` random (point, plane) pairs with distance below 1.
pub fn bound_samples(family: &Family, samples: usize, seed: u64) -> Result<Vec<BoundSample>> {
    let frame = family.frame();
    let d = frame.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb0d5);
    let draws: Vec<(f64, Vec<f64>, TangentPlaneSplit)> = (0..samples)
        .map(|_| {
            let u: f64 = rng.gen_range(0.0..1.0);
            let dir = random_direction(frame.m, &mut rng);
            (u, dir, sample_plane(frame, &mut rng))
        })
        .collect();
    let table = family.covectors();
    draws
        .par_iter()
        .map(|(u, dir, sp)| {
            let pt = point_terms(family, *u, dir)?;
            let grad_sq: f64 = (0..d)
                .map(|a| GradTerm::sum_eval(&pt.grad, &table, &unit(d, a), &sp.e).re.powi(2))
                .sum();
            Ok(BoundSample {
                dist: pt.dist,
                s_frak: sp.s_frak,
                grad_norm: grad_sq.sqrt(),
                trace: HessTerm::sum_trace(&pt.hess, &table, &sp.e).re,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundSummary {
    pub k_grad: f64,
    pub k_lower: f64,
    pub k_upper: f64,
    /// `max` of the three.
    pub k_emp: f64,
    /// `K` certified on the even-indexed half of the samples.
    pub k_calibration: f64,
    /// Every odd-indexed sample satisfies the bounds with `2 k_calibration`.
    pub holdout_ok: bool,
}

pub fn summarize_bounds(samples: &[BoundSample]) -> BoundSummary {
    let fold = |it: &mut dyn Iterator<Item = &BoundSample>| {
        it.map(|s| s.k_required()).fold((0.0_f64, 0.0_f64, 0.0_f64), |(a, b, c), (x, y, z)| (a.max(x), b.max(y), c.max(z)))
    };
    let (kg, kl, ku) = fold(&mut samples.iter());
    let (cg, cl, cu) = fold(&mut samples.iter().step_by(2));
    let kc = cg.max(cl).max(cu);
    BoundSummary {
        k_grad: kg,
        k_lower: kl,
        k_upper: ku,
        k_emp: kg.max(kl).max(ku),
        k_calibration: kc,
        holdout_ok: kc.is_finite() && samples.iter().skip(1).step_by(2).all(|s| s.satisfies(2.0 * kc)),
    }
}

pub fn tilt_bound_checks(family: &Family, opts: &SuiteOptions) -> (Vec<Check>, Vec<(String, f64)>) {
    let samples = match bound_samples(family, opts.samples, opts.seed) {
        Ok(s) => s,
        Err(e) => return (vec![Check::failed("tilt_bounds", &e)], vec![]),
    };
    let sum = summarize_bounds(&samples);
    let all = samples.iter().all(|s| s.satisfies(sum.k_emp * (1.0 + 1e-12)));
    let detail = format!(
        "K_grad {:.3}, K_lower {:.3}, K_upper {:.3} over {} samples",
        sum.k_grad,
        sum.k_lower,
        sum.k_upper,
        samples.len()
    );
    let mut out = vec![
        Check::holds("tilt_bounds.finite_constant", sum.k_emp.is_finite() && all, detail),
        Check::holds(
            "tilt_bounds.holdout",
            sum.holdout_ok,
            format!("odd samples against 2 x {:.3} from even samples", sum.k_calibration),
        ),
    ];
    out.extend(engine_consistency(family, opts.seed));
    (out, vec![("K_tilt".into(), sum.k_emp)])
}

/// The explicit `∇Ω`/`∇²Ω` expansions against the generic evaluation from
/// connection coefficients, away from the zero section.
fn engine_consistency(family: &Family, seed: u64) -> Vec<Check> {
    let frame = family.frame();
    let d = frame.dim();
    let table = family.covectors();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xe9e);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let u = 0.7 + 0.3 * k as f64 / 20.0;
        let dir = random_direction(frame.m, &mut rng);
        let t = 10f64.powf(-3.0 * (1.0 - u));
        let conn = match family {
            Family::Stenzel(st) => st.r_of_rho(1.0).and_then(|r1| st.radial_state(t * r1)).map(|s| st.connection(&s)),
            Family::Calabi(cal) => Calabi::r_of_rho(1.0).and_then(|r1| cal.radial_state(t * r1)).and_then(|s| cal.connection(&s)),
            Family::BryantSalamon(sp) => sp.connection_sample(&dir.iter().map(|v| v * t).collect::<Vec<_>>()),
        };
        let (conn, pt) = match (conn, point_terms(family, u, &dir)) {
            (Ok(c), Ok(p)) => (c, p),
            (Err(e), _) | (_, Err(e)) => return vec![Check::failed("tilt_bounds.engine", &e)],
        };
        let sp = sample_plane(frame, &mut rng);
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let refs: Vec<&[f64]> = sp.e.iter().map(|v| v.as_slice()).collect();
        let g1 = conn.grad_omega(&x, &refs);
        let g2 = GradTerm::sum_eval(&pt.grad, &table, &x, &sp.e);
        let h1 = conn.hess_trace(&sp.e);
        let h2 = HessTerm::sum_trace(&pt.hess, &table, &sp.e);
        worst = worst
            .max((g1 - g2.re).abs() / g1.abs().max(1.0))
            .max((h1 - h2.re).abs() / h1.abs().max(1.0))
            .max(g2.im.abs())
            .max(h2.im.abs());
    }
    vec![Check::below("tilt_bounds.engine", worst, 1e-9, "term expansion vs connection coefficients, 20 points")]
}

pub fn structure_checks(family: &Family, _opts: &SuiteOptions) -> (Vec<Check>, Vec<(String, f64)>) {
    match family {
        Family::BryantSalamon(sp) => {
            let f = sp.f_matrix();
            let y: Vec<f64> = (0..sp.m).map(|i| 0.3 - 0.1 * i as f64).collect();
            let skew = sp.connection_sample(&y).map(|c| c.skew_defect());
            let mut out = vec![
                Check::zero("structure.nabla_A_F", sp.nabla_af_residual(), "at the geodesic frame"),
                Check::zero("structure.F_skew", f.skew_defect(), "F^mu_nu = -F^nu_mu"),
            ];
            out.push(match skew {
                Ok(v) => Check::zero("structure.connection_skew", v, ""),
                Err(e) => Check::failed("structure.connection_skew", &e),
            });
            (out, vec![])
        }
        Family::Calabi(cal) => {
            let res: Result<(f64, f64, f64)> = [0.1, 0.5, 1.3].iter().try_fold((0.0, 0.0, 0.0), |(h, mx, ad), &r| {
                let st = cal.radial_state(r)?;
                Ok((
                    max_of([h, cal.hermitian_defect(&st)?]),
                    max_of([mx, cal.mixed_block_max(&st)?]),
                    max_of([ad, cal.antidiagonal_curvature_defect(&st)]),
                ))
            });
            match res {
                Ok((h, mx, ad)) => (
                    vec![
                        Check::below("structure.hermitian", h, 1e-13, "connection commutes with J"),
                        Check::zero("structure.mixed_block", mx, ""),
                        Check::below("structure.antidiagonal", ad, 1e-13, ""),
                    ],
                    vec![],
                ),
                Err(e) => (vec![Check::failed("structure", &e)], vec![]),
            }
        }
        Family::Stenzel(st) => {
            let res: Result<f64> = [0.1, 0.5, 1.3].iter().try_fold(0.0, |m, &r| Ok(max_of([m, st.connection(&st.radial_state(r)?).skew_defect()])));
            match res {
                Ok(v) => (vec![Check::zero("structure.connection_skew", v, "")], vec![]),
                Err(e) => (vec![Check::failed("structure", &e)], vec![]),
            }
        }
    }
}

/// Quantities available to [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Quantity {
    /// Stenzel `A, B, C` and their `ρ`-derivatives against `ρ`.
    Abc,
    /// Stenzel `|A|/ρ`, `|C|/ρ`, `|B|ρ` against `ρ`.
    Coefficients,
    /// Hessian of `ψ` (or `s`) against `r` (or `s`).
    Hessian,
    /// Bryant-Salamon relation residuals against `s`.
    Relation,
    /// Residuals of the coefficient identities against `r`.
    Identities,
}

impl Quantity {
    pub const ALL: [Quantity; 5] = [Self::Abc, Self::Coefficients, Self::Hessian, Self::Relation, Self::Identities];

    pub fn name(self) -> &'static str {
        match self {
            Self::Abc => "abc",
            Self::Coefficients => "coefficients",
            Self::Hessian => "hessian",
            Self::Relation => "relation",
            Self::Identities => "identities",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|q| q.name() == s)
            .ok_or_else(|| LabError::Config(format!("unknown quantity {s:?}")))
    }

    /// Grid used when none is given, as `(lo, hi, count)` for the half-open
    /// interval `(lo, hi]`.
    pub fn default_grid(self) -> Grid {
        match self {
            Self::Abc => Grid::new(0.0, 0.995, 200),
            Self::Coefficients => Grid::new(0.0, 0.99, 100),
            Self::Hessian | Self::Identities => Grid::new(0.0, 2.0, 100),
            Self::Relation => Grid::new(0.0, 5.0, 100),
        }
    }
}

/// `count` equally spaced points of `(lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, count: usize) -> Self {
        Self { lo, hi, count }
    }

    /// Parses `lo:hi:count`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || LabError::Config(format!("grid {s:?} is not lo:hi:count"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if !(lo.is_finite() && hi.is_finite() && hi > lo && count > 0) {
            return Err(LabError::Config(format!("grid {s:?} needs lo < hi and count > 0")));
        }
        Ok(Self { lo, hi, count })
    }

    pub fn points(&self) -> Vec<f64> {
        linspace_open(self.lo, self.hi, self.count)
    }
}

/// A CSV-ready table with a fixed header.
#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Column layout of every sweep, for help texts.
pub fn sweep_columns(q: Quantity) -> &'static str {
    match q {
        Quantity::Abc => "rho,r,A,B,C,dA,dB,dC",
        Quantity::Coefficients => "rho,abs_A_over_rho,abs_C_over_rho,abs_B_times_rho",
        Quantity::Hessian => "r,rho,min,h_0..h_{d-1} (stenzel, calabi); s,min,bound,lambda_0..lambda_{d-1} (bs)",
        Quantity::Relation => "s,alpha,beta,ode_alpha,ode_beta,ratio_residual,fd_residual",
        Quantity::Identities => "r,closed_form,finite_difference",
    }
}

pub fn sweep(family: &Family, q: Quantity, grid: Option<Grid>) -> Result<Table> {
    let grid = grid.unwrap_or_else(|| q.default_grid());
    let pts = grid.points();
    let unsupported = || LabError::Config(format!("quantity {} is not defined for {}", q.name(), family.label()));
    match (q, family) {
        (Quantity::Abc, Family::Stenzel(st)) => {
            let mut t = Table::new(&["rho", "r", "A", "B", "C", "dA", "dB", "dC"]);
            for rho in pts {
                let s = st.radial_state_at_rho(rho)?;
                t.rows.push(vec![rho, s.r, s.conn_a, s.conn_b, s.conn_c, s.conn_a_dot, s.conn_b_dot, s.conn_c_dot]);
            }
            Ok(t)
        }
        (Quantity::Coefficients, Family::Stenzel(st)) => {
            let mut t = Table::new(&["rho", "abs_A_over_rho", "abs_C_over_rho", "abs_B_times_rho"]);
            for rho in pts {
                let s = st.radial_state_at_rho(rho)?;
                t.rows.push(vec![rho, s.conn_a.abs() / rho, s.conn_c.abs() / rho, s.conn_b.abs() * rho]);
            }
            Ok(t)
        }
        (Quantity::Hessian, Family::Stenzel(_) | Family::Calabi(_)) => {
            let d = family.frame().dim();
            let mut header = vec!["r".to_string(), "rho".into(), "min".into()];
            header.extend((0..d).map(|i| format!("h_{i}")));
            let mut t = Table { header, rows: Vec::new() };
            for r in pts {
                let (rho, h) = match family {
                    Family::Stenzel(st) => {
                        let s = st.radial_state(r)?;
                        (s.rho, st.hessian_psi(&s))
                    }
                    Family::Calabi(cal) => {
                        let s = cal.radial_state(r)?;
                        (s.rho, cal.hessian_psi(&s)?)
                    }
                    Family::BryantSalamon(_) => unreachable!(),
                };
                let mut row = vec![r, rho, h.min()];
                row.extend(h.diag.iter().copied());
                t.rows.push(row);
            }
            Ok(t)
        }
        (Quantity::Hessian, Family::BryantSalamon(sp)) => {
            let d = sp.n + sp.m;
            let mut header = vec!["s".to_string(), "min".into(), "bound".into()];
            header.extend((0..d).map(|i| format!("lambda_{i}")));
            let mut t = Table { header, rows: Vec::new() };
            let dir = unit(sp.m, 0);
            for s in pts {
                let y: Vec<f64> = dir.iter().map(|v| v * s.sqrt()).collect();
                let h = sp.hessian_s(&y)?;
                let mut row = vec![s, h.min_eigenvalue(), h.bound];
                row.extend(h.eigenvalues.iter().copied());
                t.rows.push(row);
            }
            Ok(t)
        }
        (Quantity::Relation, Family::BryantSalamon(sp)) => {
            let mut t = Table::new(&["s", "alpha", "beta", "ode_alpha", "ode_beta", "ratio_residual", "fd_residual"]);
            for s in pts {
                let st = sp.alpha_beta(s)?;
                let rep = sp.relation_checks(&[s], 1e-5)?;
                t.rows.push(vec![s, st.alpha, st.beta, rep.ode_alpha, rep.ode_beta, rep.ratio_identity, rep.beta_over_alpha2_fd]);
            }
            Ok(t)
        }
        (Quantity::Identities, Family::Stenzel(st)) => {
            let mut t = Table::new(&["r", "closed_form", "finite_difference"]);
            for r in pts {
                let s = st.radial_state(r)?;
                let closed = st.identity_residual(&s)?.max();
                let h = 1e-4 * s.rho.min(1.0);
                let scale = s.conn_a_dot.abs().max(s.conn_b_dot.abs()).max(s.conn_c_dot.abs()).max(1.0);
                let fd = st.derivative_residual(&s, h)?.max() / scale;
                t.rows.push(vec![r, closed, fd]);
            }
            Ok(t)
        }
        (Quantity::Identities, Family::Calabi(cal)) => {
            let mut t = Table::new(&["r", "closed_form", "finite_difference"]);
            for r in pts {
                let hk = cal.hk_system_residual(&cal.radial_state(r)?, 1e-4 * r.min(1.0))?;
                t.rows.push(vec![r, hk.max_closed_form(), hk.max_finite_difference()]);
            }
            Ok(t)
        }
        _ => Err(unsupported()),
    }
}
