//! Parametric mean curvature flow of triangulated surfaces.
//!
//! Two ambients are supported: the `n = 2` Stenzel metric on `T*S²`, where
//! the surface is a section over an icosphere and each vertex lives in one
//! of two stereographic charts, and flat `ℝ⁴`, used to validate the scheme
//! on round spheres. At a vertex the mean curvature vector is
//! `H = Δ_Σ F + Σ_i Γ(t_i, t_i)` with the cotangent Laplacian taken in the
//! ambient metric frozen at the vertex and `Γ` from [`crate::oracle`].
//!
//! Sections move with the base point held fixed, i.e. `H` plus the tangent
//! vector that cancels its base component; spheres move by the normal part
//! of `H`. Both differ from `H` by tangential motion only.

use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt::Write as _;

use crate::geom::GRAPHICAL_MIN;
use crate::oracle::{christoffel_fd, CoframeField, Euclidean, StenzelStereoChart};
use crate::stenzel::Stenzel;
use crate::{LabError, Result};

/// Default Courant number: `dt ≤ CFL · h_min²`.
pub const CFL: f64 = 0.2;
/// Triangles with smaller metric area abort the flow.
pub const DEGENERATE_AREA: f64 = 1e-12;
/// A vertex whose stereographic coordinate exceeds this moves to the other chart.
pub const CHART_SWITCH: f64 = 1.5;
pub const MAX_LEVEL: usize = 6;

pub type Point = [f64; 4];

static FLAT: Euclidean = Euclidean { dim: 4 };

/// Unit icosphere: an icosahedron subdivided `level` times.
#[derive(Debug, Clone)]
pub struct Icosphere {
    pub vertices: Vec<[f64; 3]>,
    /// Counter-clockwise seen from outside.
    pub faces: Vec<[usize; 3]>,
}

fn normalize3(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

pub fn icosphere(level: usize) -> Result<Icosphere> {
    if level > MAX_LEVEL {
        return Err(LabError::Config(format!("mesh level {level} above {MAX_LEVEL}")));
    }
    let p = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<[f64; 3]> = [
        [-1.0, p, 0.0],
        [1.0, p, 0.0],
        [-1.0, -p, 0.0],
        [1.0, -p, 0.0],
        [0.0, -1.0, p],
        [0.0, 1.0, p],
        [0.0, -1.0, -p],
        [0.0, 1.0, -p],
        [p, 0.0, -1.0],
        [p, 0.0, 1.0],
        [-p, 0.0, -1.0],
        [-p, 0.0, 1.0],
    ]
    .into_iter()
    .map(normalize3)
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, vs: &mut Vec<[f64; 3]>| -> usize {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let (x, y) = (vs[a], vs[b]);
                vs.push(normalize3([x[0] + y[0], x[1] + y[1], x[2] + y[2]]));
                vs.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    Ok(Icosphere { vertices, faces })
}

/// Chart 0 is stereographic projection from the north pole, `z = (x + iy)/(1 − z)`;
/// chart 1 is `w = 1/z`. Both are orientation compatible.
fn chart_of(x: &[f64; 3]) -> u8 {
    if x[2] <= 0.0 {
        0
    } else {
        1
    }
}

fn stereo(x: &[f64; 3], chart: u8) -> [f64; 2] {
    if chart == 0 {
        [x[0] / (1.0 - x[2]), x[1] / (1.0 - x[2])]
    } else {
        [x[0] / (1.0 + x[2]), -x[1] / (1.0 + x[2])]
    }
}

/// Point of the unit sphere and `∂x/∂u_i` for chart coordinates `u`.
fn embed(u: [f64; 2], chart: u8) -> ([f64; 3], [[f64; 3]; 2]) {
    let s = 1.0 + u[0] * u[0] + u[1] * u[1];
    let mut x = [2.0 * u[0] / s, 2.0 * u[1] / s, 1.0 - 2.0 / s];
    let mut jac = [[0.0; 3]; 2];
    for (i, col) in jac.iter_mut().enumerate() {
        for k in 0..2 {
            col[k] = if i == k { 2.0 / s } else { 0.0 } - 4.0 * u[k] * u[i] / (s * s);
        }
        col[2] = 4.0 * u[i] / (s * s);
    }
    if chart == 1 {
        // chart 1 is chart 0 followed by the rotation diag(1, −1, −1)
        x[1] = -x[1];
        x[2] = -x[2];
        for col in jac.iter_mut() {
            col[1] = -col[1];
            col[2] = -col[2];
        }
    }
    (x, jac)
}

/// `z ↦ 1/z` on the base and `Y ↦ −Y z̄/z` on the fiber, `Y = y_0 + i y_1`.
pub fn switch_chart(p: &Point) -> Point {
    let z = Complex64::new(p[0], p[1]);
    let w = 1.0 / z;
    let y = -Complex64::new(p[2], p[3]) * z.conj() / z;
    [w.re, w.im, y.re, y.im]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ambient {
    Stenzel,
    Euclidean,
}

impl Ambient {
    pub fn field(&self) -> &'static dyn CoframeField {
        match self {
            Ambient::Stenzel => &StenzelStereoChart,
            Ambient::Euclidean => &FLAT,
        }
    }

    fn to_chart(&self, p: &Point, from: u8, to: u8) -> Point {
        if from == to || *self == Ambient::Euclidean {
            *p
        } else {
            switch_chart(p)
        }
    }
}

/// A closed triangulated surface in chart coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMesh {
    pub ambient: Ambient,
    pub positions: Vec<Point>,
    pub charts: Vec<u8>,
    pub faces: Vec<[usize; 3]>,
    /// For each vertex `v`, the pairs `(a, b)` with `(v, a, b)` a face.
    rings: Vec<Vec<[usize; 2]>>,
}

fn rings_of(nv: usize, faces: &[[usize; 3]]) -> Vec<Vec<[usize; 2]>> {
    let mut rings = vec![Vec::with_capacity(6); nv];
    for &[a, b, c] in faces {
        rings[a].push([b, c]);
        rings[b].push([c, a]);
        rings[c].push([a, b]);
    }
    rings
}

impl SurfaceMesh {
    /// The zero section of `T*S²` over an icosphere.
    pub fn zero_section(level: usize) -> Result<Self> {
        let ico = icosphere(level)?;
        let charts: Vec<u8> = ico.vertices.iter().map(chart_of).collect();
        let positions: Vec<Point> = ico
            .vertices
            .iter()
            .zip(&charts)
            .map(|(x, &c)| {
                let u = stereo(x, c);
                [u[0], u[1], 0.0, 0.0]
            })
            .collect();
        let mut mesh = Self {
            ambient: Ambient::Stenzel,
            rings: Vec::new(),
            positions,
            charts,
            faces: ico.faces,
        };
        // stereographic projection from the north pole reverses the outward orientation
        for f in mesh.faces.iter_mut() {
            f.swap(1, 2);
        }
        for f in &mesh.faces {
            if mesh.base_orientation(f) <= 0.0 {
                return Err(LabError::Numeric("inconsistent face orientation".into()));
            }
        }
        mesh.rings = rings_of(mesh.positions.len(), &mesh.faces);
        Ok(mesh)
    }

    /// Round sphere of radius `r` in the `x_3 = 0` hyperplane of flat `ℝ⁴`.
    pub fn sphere(level: usize, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(LabError::Domain(format!("sphere radius must be positive, got {radius}")));
        }
        let ico = icosphere(level)?;
        let positions = ico
            .vertices
            .iter()
            .map(|x| [radius * x[0], radius * x[1], radius * x[2], 0.0])
            .collect::<Vec<_>>();
        Ok(Self {
            ambient: Ambient::Euclidean,
            charts: vec![0; positions.len()],
            rings: rings_of(positions.len(), &ico.faces),
            positions,
            faces: ico.faces,
        })
    }

    fn base_orientation(&self, f: &[usize; 3]) -> f64 {
        let c = self.charts[f[0]];
        let p: Vec<Point> = f
            .iter()
            .map(|&i| self.ambient.to_chart(&self.positions[i], self.charts[i], c))
            .collect();
        (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0])
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    /// Base point on the unit sphere of a section vertex.
    pub fn base_point(&self, v: usize) -> [f64; 3] {
        let p = self.positions[v];
        embed([p[0], p[1]], self.charts[v]).0
    }

    fn rechart(&mut self) {
        if self.ambient == Ambient::Euclidean {
            return;
        }
        for (p, c) in self.positions.iter_mut().zip(self.charts.iter_mut()) {
            if p[0] * p[0] + p[1] * p[1] > CHART_SWITCH * CHART_SWITCH {
                *p = switch_chart(p);
                *c = 1 - *c;
            }
        }
    }
}

/// Smooth covector fields on the unit sphere used as initial sections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionMode {
    /// Tangential part of a constant ambient vector.
    UniformFrameField,
    /// Gradient of `x_2` plus the rotated gradient of `x_0 x_1`.
    LowHarmonic,
    /// Random gradients and rotated gradients of harmonics of degree ≤ 2.
    RandomSeeded,
}

impl SectionMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "uniform_frame_field" => Ok(Self::UniformFrameField),
            "low_harmonic" => Ok(Self::LowHarmonic),
            "random_seeded" => Ok(Self::RandomSeeded),
            _ => Err(LabError::Config(format!("unknown section mode {s:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::UniformFrameField => "uniform_frame_field",
            Self::LowHarmonic => "low_harmonic",
            Self::RandomSeeded => "random_seeded",
        }
    }
}

fn harmonic_gradients(x: &[f64; 3]) -> [[f64; 3]; 8] {
    let [a, b, c] = *x;
    [
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [b, a, 0.0],
        [0.0, c, b],
        [c, 0.0, a],
        [2.0 * a, -2.0 * b, 0.0],
        [-2.0 * a, -2.0 * b, 4.0 * c],
    ]
}

fn tangential(x: &[f64; 3], v: [f64; 3]) -> [f64; 3] {
    let d = x[0] * v[0] + x[1] * v[1] + x[2] * v[2];
    [v[0] - d * x[0], v[1] - d * x[1], v[2] - d * x[2]]
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn section_field(mode: SectionMode, coeffs: &[(f64, f64); 8], x: &[f64; 3]) -> [f64; 3] {
    match mode {
        SectionMode::UniformFrameField => {
            let s = 1.0 / 3f64.sqrt();
            tangential(x, [s, s, s])
        }
        SectionMode::LowHarmonic => {
            let g = tangential(x, [0.0, 0.0, 1.0]);
            let h = cross(x, &tangential(x, [x[1], x[0], 0.0]));
            [g[0] + h[0], g[1] + h[1], g[2] + h[2]]
        }
        SectionMode::RandomSeeded => {
            let mut v = [0.0; 3];
            for (grad, (a, b)) in harmonic_gradients(x).iter().zip(coeffs) {
                let g = tangential(x, *grad);
                let h = cross(x, &g);
                for k in 0..3 {
                    v[k] += a * g[k] + b * h[k];
                }
            }
            v
        }
    }
}

/// Measurements of an initial section.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct InitialReport {
    pub eps: f64,
    pub mode: SectionMode,
    pub psi_max: f64,
    pub star_omega_min: f64,
    /// `sup (d + 1 − *Ω)` over vertices, `d` the distance to the zero section.
    pub margin: f64,
}

/// Replaces the fiber coordinates of a zero section by `eps` times a unit
/// covector field; `eps` is the largest fiber radius over the vertices.
pub fn initial_section(mesh: &SurfaceMesh, eps: f64, mode: SectionMode, seed: u64) -> Result<(SurfaceMesh, InitialReport)> {
    if mesh.ambient != Ambient::Stenzel {
        return Err(LabError::Config("initial sections need the Stenzel ambient".into()));
    }
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(LabError::Config(format!("eps must be non-negative, got {eps}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = [(0.0, 0.0); 8];
    for c in coeffs.iter_mut() {
        *c = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
    }
    let mut fiber = Vec::with_capacity(mesh.vertex_count());
    for v in 0..mesh.vertex_count() {
        let p = mesh.positions[v];
        let (x, jac) = embed([p[0], p[1]], mesh.charts[v]);
        let field = section_field(mode, &coeffs, &x);
        let lam = StenzelStereoChart::lambda(&p[..2]);
        let y: Vec<f64> = jac
            .iter()
            .map(|col| (0..3).map(|k| col[k] * field[k]).sum::<f64>() / lam)
            .collect();
        fiber.push([y[0], y[1]]);
    }
    let max = fiber
        .iter()
        .map(|y| (y[0] * y[0] + y[1] * y[1]).sqrt())
        .fold(0.0, f64::max);
    if max == 0.0 {
        return Err(LabError::Numeric("section field vanishes on the mesh".into()));
    }
    let mut out = mesh.clone();
    for (p, y) in out.positions.iter_mut().zip(&fiber) {
        p[2] = eps * y[0] / max;
        p[3] = eps * y[1] / max;
    }
    let evals = evaluate(&out, crate::oracle::DEFAULT_STEP)?;
    let face_min = evals.iter().map(|e| e.face_omega_min).fold(f64::INFINITY, f64::min);
    if face_min <= GRAPHICAL_MIN {
        return Err(LabError::NotGraphical { omega: face_min });
    }
    let stenzel = Stenzel::new(2)?;
    let mut margin = f64::NEG_INFINITY;
    let mut psi_max = 0.0f64;
    for e in &evals {
        let d = stenzel.rho_of_r(e.r)?;
        psi_max = psi_max.max(d * d);
        margin = margin.max(d + 1.0 - e.star_omega);
    }
    let star_omega_min = evals.iter().map(|e| e.star_omega).fold(f64::INFINITY, f64::min);
    Ok((
        out,
        InitialReport {
            eps,
            mode,
            psi_max,
            star_omega_min,
            margin,
        },
    ))
}

/// Local geometry at one vertex.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VertexEval {
    /// Mean curvature vector in chart coordinates.
    pub h: Point,
    pub velocity: Point,
    /// `Ω` on the oriented vertex tangent plane.
    pub star_omega: f64,
    /// Smallest `Ω` over the incident faces.
    pub face_omega_min: f64,
    /// Fiber radius for sections, distance to the origin for spheres.
    pub r: f64,
    /// `|A|²` proxy from the normal deviation of the one-ring.
    pub a2: f64,
    /// A third of the incident face areas.
    pub area: f64,
    pub min_edge: f64,
}

fn sub(a: &Point, b: &Point) -> Vector4<f64> {
    Vector4::new(a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3])
}

fn eval_vertex(mesh: &SurfaceMesh, positions: &[Point], v: usize, fd_step: f64) -> Result<VertexEval> {
    let amb = mesh.ambient;
    let chart = mesh.charts[v];
    let pv = positions[v];
    let local = |j: usize| amb.to_chart(&positions[j], mesh.charts[j], chart);
    let field = amb.field();
    let e = Matrix4::from_iterator(field.coframe(&pv)?.transpose().iter().copied());
    let e_inv = e
        .try_inverse()
        .ok_or_else(|| LabError::Numeric(format!("singular coframe at {pv:?}")))?;
    let gam = christoffel_fd(field, &pv, fd_step)?;
    let gamma = |a: &Vector4<f64>, b: &Vector4<f64>| -> Vector4<f64> {
        let out = gam.apply(a.as_slice(), b.as_slice());
        Vector4::new(out[0], out[1], out[2], out[3])
    };

    let ring = &mesh.rings[v];
    let mut lap = Vector4::zeros();
    let mut mixed = 0.0;
    let mut total = 0.0;
    let mut proj = Matrix4::zeros();
    let mut face_omega_min = f64::INFINITY;
    let mut min_edge = f64::INFINITY;
    let mut edges = Vec::with_capacity(ring.len());
    for &[a, b] in ring {
        let (da, db) = (sub(&local(a), &pv), sub(&local(b), &pv));
        let (ea, eb) = (e * da, e * db);
        let ab = eb - ea;
        let (la, lb, dab) = (ea.norm_squared(), eb.norm_squared(), ea.dot(&eb));
        let area = 0.5 * (la * lb - dab * dab).max(0.0).sqrt();
        if !(area >= DEGENERATE_AREA) {
            return Err(LabError::Flow {
                t: f64::NAN,
                reason: format!("degenerate triangle at vertex {v} (area {area:.3e})"),
            });
        }
        let cot_a = -ea.dot(&ab) / (2.0 * area);
        let cot_b = eb.dot(&ab) / (2.0 * area);
        lap += db * cot_a + da * cot_b;
        mixed += if dab < 0.0 {
            area / 2.0
        } else if cot_a < 0.0 || cot_b < 0.0 {
            area / 4.0
        } else {
            (la * cot_b + lb * cot_a) / 8.0
        };
        total += area;
        min_edge = min_edge.min(la.sqrt());
        let q1 = ea / la.sqrt();
        let q2 = (eb - q1 * q1.dot(&eb)).normalize();
        proj += (q1 * q1.transpose() + q2 * q2.transpose()) * area;
        face_omega_min = face_omega_min.min(q1[0] * q2[1] - q1[1] * q2[0]);
        edges.push((ea, eb));
    }
    let eig = SymmetricEigen::new(proj);
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let n1: Vector4<f64> = eig.eigenvectors.column(order[0]).into();
    let mut n2: Vector4<f64> = eig.eigenvectors.column(order[1]).into();
    let orient: f64 = edges
        .iter()
        .map(|(a, b)| n1.dot(a) * n2.dot(b) - n1.dot(b) * n2.dot(a))
        .sum();
    if orient < 0.0 {
        n2 = -n2;
    }
    let (t1, t2) = (e_inv * n1, e_inv * n2);
    let hvec = lap / (2.0 * mixed) + gamma(&t1, &t1) + gamma(&t2, &t2);

    let velocity = match amb {
        Ambient::Euclidean => {
            let eh = e * hvec;
            hvec - t1 * eh.dot(&n1) - t2 * eh.dot(&n2)
        }
        Ambient::Stenzel => {
            // tangent vector α_1 t_1 + α_2 t_2 cancelling the base part of H
            let det = t1[0] * t2[1] - t1[1] * t2[0];
            if det.abs() < GRAPHICAL_MIN {
                return Err(LabError::NotGraphical { omega: det });
            }
            let a1 = (-hvec[0] * t2[1] + hvec[1] * t2[0]) / det;
            let a2 = (-t1[0] * hvec[1] + t1[1] * hvec[0]) / det;
            let mut w = hvec + t1 * a1 + t2 * a2;
            w[0] = 0.0;
            w[1] = 0.0;
            w
        }
    };

    let mut a2 = 0.0;
    for &[a, _] in ring {
        let d = sub(&local(a), &pv);
        let s = e * (d + gamma(&d, &d) * 0.5);
        let normal = s - n1 * s.dot(&n1) - n2 * s.dot(&n2);
        let len2 = (e * d).norm_squared();
        a2 += 4.0 * normal.norm_squared() / (len2 * len2);
    }
    a2 *= 2.0 / ring.len() as f64;

    let r = match amb {
        Ambient::Stenzel => (pv[2] * pv[2] + pv[3] * pv[3]).sqrt(),
        Ambient::Euclidean => pv.iter().map(|x| x * x).sum::<f64>().sqrt(),
    };
    Ok(VertexEval {
        h: [hvec[0], hvec[1], hvec[2], hvec[3]],
        velocity: [velocity[0], velocity[1], velocity[2], velocity[3]],
        star_omega: n1[0] * n2[1] - n1[1] * n2[0],
        face_omega_min,
        r,
        a2,
        area: total / 3.0,
        min_edge,
    })
}

fn evaluate_at(mesh: &SurfaceMesh, positions: &[Point], fd_step: f64) -> Result<Vec<VertexEval>> {
    (0..positions.len())
        .into_par_iter()
        .map(|v| eval_vertex(mesh, positions, v, fd_step))
        .collect()
}

/// Per-vertex geometry of the mesh, in vertex order.
pub fn evaluate(mesh: &SurfaceMesh, fd_step: f64) -> Result<Vec<VertexEval>> {
    evaluate_at(mesh, &mesh.positions, fd_step)
}

/// Mean curvature vector at every vertex, in the vertex's chart.
pub fn mean_curvature(mesh: &SurfaceMesh, fd_step: f64) -> Result<Vec<Point>> {
    Ok(evaluate(mesh, fd_step)?.into_iter().map(|e| e.h).collect())
}

/// One row of the monitor series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonitorRow {
    pub step: usize,
    pub t: f64,
    pub psi_max: f64,
    pub star_omega_min: f64,
    pub stability_min: f64,
    #[serde(rename = "A2_max")]
    pub a2_max: f64,
    pub volume: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FlowMonitors {
    pub rows: Vec<MonitorRow>,
}

pub const MONITOR_HEADER: &str = "step,t,psi_max,star_omega_min,stability_min,A2_max,volume";

impl FlowMonitors {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(MONITOR_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.step, r.t, r.psi_max, r.star_omega_min, r.stability_min, r.a2_max, r.volume
            );
        }
        s
    }

    pub fn last(&self) -> Option<&MonitorRow> {
        self.rows.last()
    }
}

/// A surface under the flow with its monitor history.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub mesh: SurfaceMesh,
    pub t: f64,
    pub steps: usize,
    pub k0: f64,
    pub fd_step: f64,
    pub monitors: FlowMonitors,
    stenzel: Stenzel,
    current: Vec<VertexEval>,
}

impl FlowState {
    pub fn new(mesh: SurfaceMesh, k0: f64, fd_step: f64) -> Result<Self> {
        let current = evaluate(&mesh, fd_step)?;
        let mut s = Self {
            mesh,
            t: 0.0,
            steps: 0,
            k0,
            fd_step,
            monitors: FlowMonitors::default(),
            stenzel: Stenzel::new(2)?,
            current,
        };
        s.record()?;
        Ok(s)
    }

    pub fn current(&self) -> &[VertexEval] {
        &self.current
    }

    /// Shortest edge in the ambient metric.
    pub fn h_min(&self) -> f64 {
        self.current.iter().map(|e| e.min_edge).fold(f64::INFINITY, f64::min)
    }

    pub fn max_stable_dt(&self) -> f64 {
        CFL * self.h_min().powi(2)
    }

    fn psi(&self, r: f64) -> Result<f64> {
        match self.mesh.ambient {
            Ambient::Stenzel => Ok(self.stenzel.rho_of_r(r)?.powi(2)),
            Ambient::Euclidean => Ok(r * r),
        }
    }

    fn record(&mut self) -> Result<()> {
        let mut psi_max = 0.0f64;
        let mut star_min = f64::INFINITY;
        let mut stab_min = f64::INFINITY;
        let mut a2_max = 0.0f64;
        let mut volume = 0.0;
        for e in &self.current {
            let psi = self.psi(e.r)?;
            psi_max = psi_max.max(psi);
            star_min = star_min.min(e.star_omega);
            stab_min = stab_min.min(e.star_omega - self.k0 * psi);
            a2_max = a2_max.max(e.a2);
            volume += e.area;
        }
        self.monitors.rows.push(MonitorRow {
            step: self.steps,
            t: self.t,
            psi_max,
            star_omega_min: star_min,
            stability_min: stab_min,
            a2_max,
            volume,
        });
        Ok(())
    }

    /// One explicit RK4 step.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        if !(dt > 0.0) || dt > self.max_stable_dt() {
            return Err(LabError::Config(format!(
                "dt = {dt:.3e} violates 0 < dt ≤ {CFL}·h_min² = {:.3e}",
                self.max_stable_dt()
            )));
        }
        let p0 = self.mesh.positions.clone();
        let shifted = |k: &[VertexEval], c: f64| -> Vec<Point> {
            p0.iter()
                .zip(k)
                .map(|(p, e)| std::array::from_fn(|i| p[i] + c * e.velocity[i]))
                .collect()
        };
        let k1 = &self.current;
        let k2 = evaluate_at(&self.mesh, &shifted(k1, dt / 2.0), self.fd_step).map_err(|e| self.tag(e))?;
        let k3 = evaluate_at(&self.mesh, &shifted(&k2, dt / 2.0), self.fd_step).map_err(|e| self.tag(e))?;
        let k4 = evaluate_at(&self.mesh, &shifted(&k3, dt), self.fd_step).map_err(|e| self.tag(e))?;
        for (i, p) in self.mesh.positions.iter_mut().enumerate() {
            for c in 0..4 {
                p[c] += dt / 6.0
                    * (k1[i].velocity[c] + 2.0 * k2[i].velocity[c] + 2.0 * k3[i].velocity[c] + k4[i].velocity[c]);
            }
        }
        self.mesh.rechart();
        self.t += dt;
        self.steps += 1;
        self.current = evaluate(&self.mesh, self.fd_step).map_err(|e| self.tag(e))?;
        if self.mesh.ambient == Ambient::Stenzel {
            let face_min = self.current.iter().map(|e| e.face_omega_min).fold(f64::INFINITY, f64::min);
            if face_min <= GRAPHICAL_MIN {
                return Err(LabError::Flow {
                    t: self.t,
                    reason: format!("lost graphicality (min face Omega {face_min:.3e})"),
                });
            }
        }
        self.record()
    }

    fn tag(&self, e: LabError) -> LabError {
        match e {
            LabError::Flow { reason, .. } => LabError::Flow { t: self.t, reason },
            other => other,
        }
    }
}

/// Inputs of a stability experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub eps: f64,
    pub k0: f64,
    pub mesh_level: usize,
    /// Time step; `None` picks half the CFL limit of the initial mesh.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub seed: u64,
    pub mode: SectionMode,
    /// The run stops once `ψ_max` drops below this value.
    pub psi_threshold: f64,
    pub fd_step: f64,
    /// Per-step slack in the monotonicity checks.
    pub monotone_tol: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            eps: 0.05,
            k0: 10.0,
            mesh_level: 4,
            dt: None,
            t_end: 20.0,
            seed: 0,
            mode: SectionMode::LowHarmonic,
            psi_threshold: 1e-4,
            fd_step: 1e-4,
            monotone_tol: 1e-8,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LabError::Config(m));
        if !(self.eps >= 0.0) || !self.eps.is_finite() {
            return bad(format!("eps must be non-negative, got {}", self.eps));
        }
        if !(self.k0 >= 0.0) || !self.k0.is_finite() {
            return bad(format!("k0 must be non-negative, got {}", self.k0));
        }
        if self.mesh_level > MAX_LEVEL {
            return bad(format!("mesh level {} above {MAX_LEVEL}", self.mesh_level));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return bad(format!("dt must be positive, got {dt}"));
            }
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return bad(format!("t_end must be non-negative, got {}", self.t_end));
        }
        if !(self.psi_threshold > 0.0) {
            return bad("psi threshold must be positive".into());
        }
        if !(1e-6..=1e-2).contains(&self.fd_step) {
            return bad(format!("fd step {} outside [1e-6, 1e-2]", self.fd_step));
        }
        if !(self.monotone_tol >= 0.0) {
            return bad("monotone tolerance must be non-negative".into());
        }
        Ok(())
    }
}

/// Least-squares fit `ln y ≈ ln a − λ t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub rate: f64,
    pub log_amplitude: f64,
    pub r_squared: f64,
    pub points: usize,
}

pub fn exponential_fit(t: &[f64], y: &[f64]) -> Option<DecayFit> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(y)
        .filter(|(_, v)| **v > 0.0)
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    let n = pts.len();
    if n < 3 {
        return None;
    }
    let nf = n as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if stt == 0.0 {
        return None;
    }
    let slope = sty / stt;
    let r_squared = if syy == 0.0 { 1.0 } else { sty * sty / (stt * syy) };
    Some(DecayFit {
        rate: -slope,
        log_amplitude: my - slope * mt,
        r_squared,
        points: n,
    })
}

/// Largest per-step violation of monotonicity in the given direction.
fn worst_step(values: &[f64], increasing: bool) -> f64 {
    values
        .windows(2)
        .map(|w| if increasing { w[0] - w[1] } else { w[1] - w[0] })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowReport {
    pub config: FlowConfig,
    pub initial: InitialReport,
    pub vertices: usize,
    pub dt: f64,
    pub steps: usize,
    pub t_final: f64,
    pub terminal_psi_max: f64,
    pub converged: bool,
    /// Largest per-step increase of `ψ_max`.
    pub psi_max_worst_increase: f64,
    /// Largest per-step decrease of `min(*Ω − K₀ψ)` while it exceeds `1 − eps`.
    pub stability_worst_decrease: f64,
    pub volume_worst_increase: f64,
    pub decay: Option<DecayFit>,
    pub failure: Option<String>,
    #[serde(skip)]
    pub monitors: FlowMonitors,
}

impl FlowReport {
    pub fn psi_monotone(&self) -> bool {
        self.psi_max_worst_increase <= self.config.monotone_tol
    }

    pub fn stability_monotone(&self) -> bool {
        self.stability_worst_decrease <= self.config.monotone_tol
    }

    pub fn passed(&self) -> bool {
        self.failure.is_none() && self.converged && self.psi_monotone() && self.stability_monotone()
    }
}

/// Flows an `eps`-section of `T*S²` towards the zero section.
pub fn run_stability_experiment(cfg: &FlowConfig) -> Result<FlowReport> {
    cfg.validate()?;
    let zero = SurfaceMesh::zero_section(cfg.mesh_level)?;
    let (mesh, initial) = if cfg.eps == 0.0 {
        let init = InitialReport {
            eps: 0.0,
            mode: cfg.mode,
            psi_max: 0.0,
            star_omega_min: 1.0,
            margin: 0.0,
        };
        (zero, init)
    } else {
        initial_section(&zero, cfg.eps, cfg.mode, cfg.seed)?
    };
    let mut state = FlowState::new(mesh, cfg.k0, cfg.fd_step)?;
    let dt = cfg.dt.unwrap_or(0.5 * state.max_stable_dt());
    let mut failure = None;
    while state.monitors.last().map_or(0.0, |r| r.psi_max) >= cfg.psi_threshold && state.t < cfg.t_end {
        let h = dt.min(cfg.t_end - state.t);
        match state.step(h) {
            Ok(()) => {}
            Err(e @ LabError::Config(_)) => return Err(e),
            Err(e) => {
                failure = Some(e.to_string());
                break;
            }
        }
    }
    let rows = &state.monitors.rows;
    let psi: Vec<f64> = rows.iter().map(|r| r.psi_max).collect();
    let t: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let floor = 1.0 - cfg.eps;
    let stab: Vec<f64> = rows
        .iter()
        .map(|r| r.stability_min)
        .take_while(|v| *v > floor)
        .collect();
    let vol: Vec<f64> = rows.iter().map(|r| r.volume).collect();
    let terminal = *psi.last().unwrap_or(&0.0);
    Ok(FlowReport {
        config: cfg.clone(),
        initial,
        vertices: state.mesh.vertex_count(),
        dt,
        steps: state.steps,
        t_final: state.t,
        terminal_psi_max: terminal,
        converged: failure.is_none() && terminal < cfg.psi_threshold,
        psi_max_worst_increase: worst_step(&psi, false),
        stability_worst_decrease: worst_step(&stab, true),
        volume_worst_increase: worst_step(&vol, false),
        decay: exponential_fit(&t, &psi),
        failure,
        monitors: state.monitors,
    })
}

/// Shrinking round sphere in flat space against `R(t) = √(R₀² − 4t)`.
#[derive(Debug, Clone, Serialize)]
pub struct SphereReport {
    pub level: usize,
    pub r0: f64,
    pub t_end: f64,
    pub steps: usize,
    /// `max_v ||H_v| − 2/R₀| / (2/R₀)` on the initial sphere.
    pub initial_h_error: f64,
    /// Largest relative deviation of the mean radius from the exact law.
    pub max_radius_error: f64,
    pub final_radius: f64,
}

pub fn shrinking_sphere(level: usize, r0: f64, t_end: f64) -> Result<SphereReport> {
    if !(t_end >= 0.0) || 4.0 * t_end >= r0 * r0 {
        return Err(LabError::Config(format!("t_end must lie in [0, R₀²/4), got {t_end}")));
    }
    let mesh = SurfaceMesh::sphere(level, r0)?;
    let mut state = FlowState::new(mesh, 0.0, crate::oracle::DEFAULT_STEP)?;
    let exact_h = 2.0 / r0;
    let initial_h_error = state
        .current()
        .iter()
        .map(|e| ((e.h.iter().map(|x| x * x).sum::<f64>()).sqrt() - exact_h).abs() / exact_h)
        .fold(0.0, f64::max);
    let r_end = (r0 * r0 - 4.0 * t_end).sqrt();
    // the CFL bound shrinks with the sphere
    let dt = 0.5 * state.max_stable_dt() * (r_end / r0).powi(2);
    let mean_radius = |s: &FlowState| s.current().iter().map(|e| e.r).sum::<f64>() / s.current().len() as f64;
    let mut worst = 0.0f64;
    while state.t < t_end {
        state.step(dt.min(t_end - state.t))?;
        let exact = (r0 * r0 - 4.0 * state.t).sqrt();
        worst = worst.max((mean_radius(&state) - exact).abs() / exact);
    }
    Ok(SphereReport {
        level,
        r0,
        t_end,
        steps: state.steps,
        initial_h_error,
        max_radius_error: worst,
        final_radius: mean_radius(&state),
    })
}
