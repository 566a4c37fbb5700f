use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::Serialize;

use super::frame::ComplexStructure;
use crate::{LabError, Result};

/// Frame components `R_abcd = R(e_a, e_b, e_c, e_d)` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct RiemannSample {
    dim: usize,
    data: Vec<f64>,
}

impl RiemannSample {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim.pow(4)],
        }
    }

    /// Constant sectional curvature `kappa`.
    pub fn space_form(dim: usize, kappa: f64) -> Self {
        let mut r = Self::zeros(dim);
        for a in 0..dim {
            for b in 0..dim {
                if a != b {
                    r.set(a, b, a, b, kappa);
                    r.set(a, b, b, a, -kappa);
                }
            }
        }
        r
    }

    /// Builds a full tensor from a list of components, completing it under the
    /// antisymmetries, pair symmetry and, when given, `J`-invariance in each
    /// pair. Components never reached stay zero. Two different values landing
    /// on one slot produce [`LabError::Inconsistent`].
    pub fn from_table(
        dim: usize,
        entries: &[([usize; 4], f64)],
        j: Option<&ComplexStructure>,
        tol: f64,
    ) -> Result<Self> {
        let mut r = Self::zeros(dim);
        let mut assigned = vec![false; dim.pow(4)];
        for &(t, value) in entries {
            if t.iter().any(|&i| i >= dim) {
                return Err(LabError::Domain(format!("index {t:?} out of range for dim {dim}")));
            }
            let orbit = orbit(t, j);
            let self_negating = orbit.iter().any(|&(u, s)| u == t && s < 0.0);
            if self_negating && value.abs() > tol {
                return Err(LabError::Inconsistent {
                    index: t,
                    first: value,
                    second: -value,
                });
            }
            for (u, s) in orbit {
                let idx = r.index(u[0], u[1], u[2], u[3]);
                let v = if self_negating { 0.0 } else { s * value };
                if assigned[idx] {
                    let old = r.data[idx];
                    if (old - v).abs() > tol * (1.0 + old.abs().max(v.abs())) {
                        return Err(LabError::Inconsistent {
                            index: u,
                            first: old,
                            second: v,
                        });
                    }
                } else {
                    r.data[idx] = v;
                    assigned[idx] = true;
                }
            }
        }
        Ok(r)
    }

    /// Builds a tensor from an arbitrary component function, with no closure.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut r = Self::zeros(dim);
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    for d in 0..dim {
                        let idx = r.index(a, b, c, d);
                        r.data[idx] = f(a, b, c, d);
                    }
                }
            }
        }
        r
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn index(&self, a: usize, b: usize, c: usize, d: usize) -> usize {
        ((a * self.dim + b) * self.dim + c) * self.dim + d
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.data[self.index(a, b, c, d)]
    }

    pub fn set(&mut self, a: usize, b: usize, c: usize, d: usize, v: f64) {
        let idx = self.index(a, b, c, d);
        self.data[idx] = v;
    }

    /// `R(X,Y,Z,W)` for frame-component vectors.
    pub fn eval(&self, x: &[f64], y: &[f64], z: &[f64], w: &[f64]) -> f64 {
        let n = self.dim;
        let mut acc = 0.0;
        for a in 0..n {
            if x[a] == 0.0 {
                continue;
            }
            for b in 0..n {
                if y[b] == 0.0 {
                    continue;
                }
                let xy = x[a] * y[b];
                for c in 0..n {
                    if z[c] == 0.0 {
                        continue;
                    }
                    for d in 0..n {
                        acc += xy * z[c] * w[d] * self.get(a, b, c, d);
                    }
                }
            }
        }
        acc
    }

    /// Sectional curvature of the plane spanned by `x`, `y`.
    pub fn sectional(&self, x: &[f64], y: &[f64]) -> f64 {
        let xx: f64 = x.iter().map(|v| v * v).sum();
        let yy: f64 = y.iter().map(|v| v * v).sum();
        let xy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        self.eval(x, y, x, y) / (xx * yy - xy * xy)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute componentwise difference.
    pub fn max_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// Components in a new orthonormal frame `f_i = Σ_a p[(a, i)] e_a`.
    pub fn change_frame(&self, p: &DMatrix<f64>) -> Self {
        let n = self.dim;
        let k = p.ncols();
        // contract one slot at a time
        let mut cur = self.data.clone();
        let mut dims = [n, n, n, n];
        for slot in 0..4 {
            let mut next_dims = dims;
            next_dims[slot] = k;
            let total: usize = next_dims.iter().product();
            let mut next = vec![0.0; total];
            for i0 in 0..next_dims[0] {
                for i1 in 0..next_dims[1] {
                    for i2 in 0..next_dims[2] {
                        for i3 in 0..next_dims[3] {
                            let out = [i0, i1, i2, i3];
                            let mut acc = 0.0;
                            for a in 0..n {
                                let mut src = out;
                                src[slot] = a;
                                let sidx = ((src[0] * dims[1] + src[1]) * dims[2] + src[2]) * dims[3]
                                    + src[3];
                                acc += p[(a, out[slot])] * cur[sidx];
                            }
                            let oidx = ((i0 * next_dims[1] + i1) * next_dims[2] + i2) * next_dims[3] + i3;
                            next[oidx] = acc;
                        }
                    }
                }
            }
            cur = next;
            dims = next_dims;
        }
        Self { dim: k, data: cur }
    }
}

fn orbit(t: [usize; 4], j: Option<&ComplexStructure>) -> Vec<([usize; 4], f64)> {
    let mut seen: Vec<([usize; 4], f64)> = vec![(t, 1.0)];
    let mut queue = VecDeque::from([(t, 1.0)]);
    while let Some((u, s)) = queue.pop_front() {
        let [a, b, c, d] = u;
        let mut next = vec![([b, a, c, d], -s), ([a, b, d, c], -s), ([c, d, a, b], s)];
        if let Some(j) = j {
            next.push(([a, b, j.image[c], j.image[d]], s * j.sign[c] * j.sign[d]));
        }
        for (v, sv) in next {
            match seen.iter().find(|(w, _)| *w == v) {
                Some(&(_, sw)) if sw != sv => {
                    // the slot is forced to vanish; mark it by recording both signs
                    if !seen.iter().any(|(w, s2)| *w == t && *s2 < 0.0) {
                        seen.push((t, -1.0));
                    }
                }
                Some(_) => {}
                None => {
                    seen.push((v, sv));
                    queue.push_back((v, sv));
                }
            }
        }
    }
    seen
}

/// Maximal violations of the algebraic curvature identities.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SymmetryReport {
    pub antisym_first: f64,
    pub antisym_last: f64,
    pub pair: f64,
    pub bianchi: f64,
    pub j_invariance: Option<f64>,
}

impl SymmetryReport {
    pub fn max(&self) -> f64 {
        [
            self.antisym_first,
            self.antisym_last,
            self.pair,
            self.bianchi,
            self.j_invariance.unwrap_or(0.0),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn passed(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

pub fn check_riemann_symmetries(r: &RiemannSample, j: Option<&ComplexStructure>) -> SymmetryReport {
    let n = r.dim();
    let mut rep = SymmetryReport {
        antisym_first: 0.0,
        antisym_last: 0.0,
        pair: 0.0,
        bianchi: 0.0,
        j_invariance: j.map(|_| 0.0),
    };
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let v = r.get(a, b, c, d);
                    rep.antisym_first = rep.antisym_first.max((v + r.get(b, a, c, d)).abs());
                    rep.antisym_last = rep.antisym_last.max((v + r.get(a, b, d, c)).abs());
                    rep.pair = rep.pair.max((v - r.get(c, d, a, b)).abs());
                    let cyc = v + r.get(a, c, d, b) + r.get(a, d, b, c);
                    rep.bianchi = rep.bianchi.max(cyc.abs());
                    if let (Some(j), Some(m)) = (j, rep.j_invariance.as_mut()) {
                        let jv = j.sign[c] * j.sign[d] * r.get(a, b, j.image[c], j.image[d]);
                        *m = m.max((v - jv).abs());
                    }
                }
            }
        }
    }
    rep
}

/// `Ric_xy = Σ_k R_{x k y k}`.
pub fn ricci_contract(r: &RiemannSample) -> DMatrix<f64> {
    let n = r.dim();
    DMatrix::from_fn(n, n, |x, y| (0..n).map(|k| r.get(x, k, y, k)).sum())
}
