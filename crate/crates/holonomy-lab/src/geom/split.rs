use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::forms::det_real;
use super::frame::FrameIndexSet;
use crate::{LabError, Result};

/// Threshold on `Ω(L)` below which a plane is not treated as a graph.
pub const GRAPHICAL_MIN: f64 = 1e-12;

/// Singular-value description of an oriented graphical `n`-plane.
///
/// `e_j = cos θ_j u_j + sin θ_j v_j` is an oriented orthonormal basis of the
/// plane and `e_{n+μ} = −sin θ_μ u_μ + cos θ_μ v_μ` of its complement, where
/// `u_μ` is absent for `μ ≥ n` and `v_j` is absent for `j ≥ m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TangentPlaneSplit {
    pub frame: FrameIndexSet,
    /// Sorted by decreasing `|sin θ_j|`; ties keep the SVD order.
    pub theta: Vec<f64>,
    /// Orthonormal basis of the horizontal space, `u.len() == n`.
    pub u: Vec<Vec<f64>>,
    /// Orthonormal basis of the vertical space, `v.len() == m`.
    pub v: Vec<Vec<f64>>,
    pub e: Vec<Vec<f64>>,
    pub e_perp: Vec<Vec<f64>>,
    pub s_frak: f64,
}

impl TangentPlaneSplit {
    /// `u_μ`, present only for `μ < n`.
    pub fn u_paired(&self, mu: usize) -> Option<&[f64]> {
        self.u.get(mu).map(|v| v.as_slice())
    }

    /// `v_j`, present only for `j < m`.
    pub fn v_paired(&self, j: usize) -> Option<&[f64]> {
        self.v.get(j).map(|v| v.as_slice())
    }

    /// `θ_μ` extended by zero.
    pub fn angle(&self, j: usize) -> f64 {
        self.theta.get(j).copied().unwrap_or(0.0)
    }

    /// `Ω(e_0, …, e_{n-1})` computed from the basis.
    pub fn omega(&self) -> f64 {
        omega_of(&self.e, self.frame.n)
    }

    /// `Π cos θ_j`.
    pub fn cos_product(&self) -> f64 {
        self.theta.iter().map(|t| t.cos()).product()
    }
}

fn omega_of(vs: &[Vec<f64>], n: usize) -> f64 {
    let mut m = Vec::with_capacity(n * n);
    for i in 0..n {
        for v in vs {
            m.push(v[i]);
        }
    }
    det_real(&mut m, n)
}

fn gram_schmidt(cols: &mut [Vec<f64>]) -> Result<()> {
    for j in 0..cols.len() {
        // two projection passes keep the columns orthogonal to roundoff
        for k in (0..j).chain(0..j) {
            let d: f64 = cols[j].iter().zip(&cols[k]).map(|(a, b)| a * b).sum();
            let ck = cols[k].clone();
            for (x, y) in cols[j].iter_mut().zip(&ck) {
                *x -= d * y;
            }
        }
        let norm = cols[j].iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-13 {
            return Err(LabError::Numeric("basis is linearly dependent".into()));
        }
        for x in cols[j].iter_mut() {
            *x /= norm;
        }
    }
    Ok(())
}

/// Splits the plane spanned by `basis` (frame components) into singular
/// angles relative to the horizontal/vertical decomposition.
pub fn split_plane(basis: &[Vec<f64>], frame: FrameIndexSet) -> Result<TangentPlaneSplit> {
    let (n, m, dim) = (frame.n, frame.m, frame.dim());
    if basis.len() != n || basis.iter().any(|v| v.len() != dim) {
        return Err(LabError::Domain(format!(
            "expected {n} vectors of length {dim}"
        )));
    }
    let mut q = basis.to_vec();
    gram_schmidt(&mut q)?;
    let omega = omega_of(&q, n);
    if omega <= GRAPHICAL_MIN {
        return Err(LabError::NotGraphical { omega });
    }

    let qh = DMatrix::from_fn(n, n, |i, j| q[j][i]);
    let svd = qh.svd(true, true);
    let mut uu = svd.u.ok_or_else(|| LabError::Numeric("svd failed".into()))?;
    let mut w = svd
        .v_t
        .ok_or_else(|| LabError::Numeric("svd failed".into()))?
        .transpose();
    let sigma = svd.singular_values;
    if w.determinant() < 0.0 {
        for i in 0..n {
            w[(i, n - 1)] = -w[(i, n - 1)];
            uu[(i, n - 1)] = -uu[(i, n - 1)];
        }
    }

    // e_j = Q w_j; its vertical part has length sin θ_j
    let mut theta = Vec::with_capacity(n);
    let mut e = Vec::with_capacity(n);
    let mut vert = Vec::with_capacity(n);
    for j in 0..n {
        let ej: Vec<f64> = (0..dim)
            .map(|a| (0..n).map(|k| q[k][a] * w[(k, j)]).sum())
            .collect();
        let vpart: Vec<f64> = ej[n..].to_vec();
        let s = vpart.iter().map(|x| x * x).sum::<f64>().sqrt();
        theta.push(s.atan2(sigma[j].min(1.0)));
        e.push(ej);
        vert.push(vpart);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        theta[b]
            .sin()
            .abs()
            .partial_cmp(&theta[a].sin().abs())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let odd = permutation_is_odd(&order);

    let mut theta_s: Vec<f64> = order.iter().map(|&j| theta[j]).collect();
    let mut e_s: Vec<Vec<f64>> = order.iter().map(|&j| e[j].clone()).collect();
    let mut u_s: Vec<Vec<f64>> = order
        .iter()
        .map(|&j| {
            let mut u = vec![0.0; dim];
            for i in 0..n {
                u[i] = uu[(i, j)];
            }
            u
        })
        .collect();

    // vertical partners: normalised vertical parts, completed to a basis
    let mut v_s: Vec<Vec<f64>> = Vec::with_capacity(m);
    for (p, &j) in order.iter().enumerate() {
        if v_s.len() == m {
            break;
        }
        let s = theta[j].sin();
        if s.abs() > 1e-12 {
            let mut v = vec![0.0; dim];
            for mu in 0..m {
                v[n + mu] = vert[j][mu] / s;
            }
            // roundoff-level angles give partners that are not orthogonal
            for w in &v_s {
                let d: f64 = v.iter().zip(w).map(|(a, b)| a * b).sum();
                for (x, y) in v.iter_mut().zip(w) {
                    *x -= d * y;
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.5 {
                v.iter_mut().for_each(|x| *x /= norm);
                v_s.push(v);
                continue;
            }
        }
        if p < theta_s.len() && v_s.len() == p {
            theta_s[p] = 0.0;
        }
    }
    let mut candidate = 0;
    while v_s.len() < m {
        let mut v = vec![0.0; dim];
        v[n + candidate] = 1.0;
        candidate += 1;
        for w in &v_s {
            let d: f64 = v.iter().zip(w).map(|(a, b)| a * b).sum();
            for (x, y) in v.iter_mut().zip(w) {
                *x -= d * y;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            v_s.push(v);
        }
    }

    if odd {
        let last = n - 1;
        u_s[last].iter_mut().for_each(|x| *x = -*x);
        e_s[last].iter_mut().for_each(|x| *x = -*x);
        if last < m {
            v_s[last].iter_mut().for_each(|x| *x = -*x);
        }
    }
    for t in theta_s.iter_mut() {
        if *t < 0.0 {
            *t = 0.0;
        }
    }

    let e_perp: Vec<Vec<f64>> = (0..m)
        .map(|mu| {
            let th = theta_s.get(mu).copied().unwrap_or(0.0);
            let mut out: Vec<f64> = v_s[mu].iter().map(|x| th.cos() * x).collect();
            if mu < n {
                for (o, u) in out.iter_mut().zip(&u_s[mu]) {
                    *o -= th.sin() * u;
                }
            }
            out
        })
        .collect();

    // restore exact orthogonality to the plane lost in degenerate cases
    let mut e_perp = e_perp;
    for k in 0..e_perp.len() {
        for w in e_s.iter().chain(e_perp[..k].to_vec().iter()) {
            let d: f64 = e_perp[k].iter().zip(w).map(|(a, b)| a * b).sum();
            for (x, y) in e_perp[k].iter_mut().zip(w) {
                *x -= d * y;
            }
        }
        let norm = e_perp[k].iter().map(|x| x * x).sum::<f64>().sqrt();
        e_perp[k].iter_mut().for_each(|x| *x /= norm);
    }

    let s_frak = theta_s.iter().fold(0.0_f64, |acc, t| acc.max(t.sin().abs()));
    Ok(TangentPlaneSplit {
        frame,
        theta: theta_s,
        u: u_s,
        v: v_s,
        e: e_s,
        e_perp,
        s_frak,
    })
}

fn permutation_is_odd(p: &[usize]) -> bool {
    let mut seen = vec![false; p.len()];
    let mut transpositions = 0;
    for start in 0..p.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut j = start;
        while !seen[j] {
            seen[j] = true;
            j = p[j];
            len += 1;
        }
        transpositions += len - 1;
    }
    transpositions % 2 == 1
}

/// Largest left-hand side of each linear estimate over all index choices,
/// alongside its bound.
#[derive(Debug, Clone, Serialize)]
pub struct LinearEstimates {
    pub s_frak: f64,
    /// `(name, max lhs, bound)`
    pub entries: Vec<(String, f64, f64)>,
}

impl LinearEstimates {
    pub fn passed(&self, slack: f64) -> bool {
        self.entries.iter().all(|(_, lhs, bound)| *lhs <= bound + slack)
    }

    pub fn worst_margin(&self) -> f64 {
        self.entries
            .iter()
            .map(|(_, lhs, bound)| lhs - bound)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn eval_coframe_wedge(rows: &[usize], vs: &[&Vec<f64>]) -> f64 {
    let k = rows.len();
    let mut m = Vec::with_capacity(k * k);
    for &r in rows {
        for v in vs {
            m.push(v[r]);
        }
    }
    det_real(&mut m, k)
}

/// Evaluates every pairing bounded in terms of `𝔰` for the split's bases.
pub fn linear_estimates(split: &TangentPlaneSplit) -> LinearEstimates {
    let n = split.frame.n;
    let m = split.frame.m;
    let s = split.s_frak;
    let e = &split.e;
    let ep = &split.e_perp;
    let mut a1: f64 = 0.0;
    let mut a2: f64 = 0.0;
    for j in 0..n {
        for k in 0..n {
            a1 = a1.max(e.iter().map(|v| (v[j] * v[k]).abs()).sum());
        }
        for mu in 0..m {
            a2 = a2.max(e.iter().map(|v| (v[n + mu] * v[j]).abs()).sum());
        }
    }
    let horiz: Vec<usize> = (0..n).collect();
    let mut b1: f64 = 0.0;
    let mut b2: f64 = 0.0;
    let mut b3: f64 = 0.0;
    let mut b4: f64 = 0.0;
    let mut b5: f64 = 0.0;
    for i in 0..n {
        let rest_e: Vec<&Vec<f64>> = (0..n).filter(|&k| k != i).map(|k| &e[k]).collect();
        let rows_wo_i: Vec<usize> = horiz.iter().copied().filter(|&k| k != i).collect();
        for mu in 0..m {
            let mut vs = vec![&ep[mu]];
            vs.extend(rest_e.iter().copied());
            b1 = b1.max(eval_coframe_wedge(&horiz, &vs).abs());

            let mut rows = vec![n + mu];
            rows.extend(rows_wo_i.iter().copied());
            let all: Vec<&Vec<f64>> = e.iter().collect();
            b3 = b3.max(eval_coframe_wedge(&rows, &all).abs());
            for j in 0..n {
                for nu in 0..m {
                    let mut vs = vec![&ep[nu]];
                    vs.extend((0..n).filter(|&k| k != j).map(|k| &e[k]));
                    b4 = b4.max(eval_coframe_wedge(&rows, &vs).abs());
                }
            }
        }
        for j in 0..n {
            if j == i {
                continue;
            }
            let rest2: Vec<&Vec<f64>> =
                (0..n).filter(|&k| k != i && k != j).map(|k| &e[k]).collect();
            let rows_wo_ij: Vec<usize> = horiz.iter().copied().filter(|&k| k != i && k != j).collect();
            for mu in 0..m {
                for nu in 0..m {
                    let mut vs = vec![&ep[mu], &ep[nu]];
                    vs.extend(rest2.iter().copied());
                    b2 = b2.max(eval_coframe_wedge(&horiz, &vs).abs());
                    let mut rows = vec![n + mu, n + nu];
                    rows.extend(rows_wo_ij.iter().copied());
                    let all: Vec<&Vec<f64>> = e.iter().collect();
                    b5 = b5.max(eval_coframe_wedge(&rows, &all).abs());
                }
            }
        }
    }
    let nf = n as f64;
    LinearEstimates {
        s_frak: s,
        entries: vec![
            ("sum |w^j w^k (e_i,e_i)|".into(), a1, nf),
            ("sum |w^{n+mu} w^j (e_i,e_i)|".into(), a2, nf * s),
            ("Omega(e_{n+mu}, e minus e_i)".into(), b1, s),
            ("Omega(e_{n+mu}, e_{n+nu}, e minus e_i, e_j)".into(), b2, s * s),
            ("(w^{n+mu} ^ Omega^i)(e)".into(), b3, nf * s),
            ("(w^{n+mu} ^ Omega^i)(e_{n+nu}, e minus e_j)".into(), b4, 1.0),
            ("(w^{n+mu} ^ w^{n+nu} ^ Omega^{ij})(e)".into(), b5, nf * (nf - 1.0) * s * s),
        ],
    }
}

/// A Haar-random oriented orthonormal `n`-frame in the total frame.
pub fn random_plane<R: Rng + ?Sized>(frame: FrameIndexSet, rng: &mut R) -> Vec<Vec<f64>> {
    let dim = frame.dim();
    loop {
        let mut cols: Vec<Vec<f64>> = (0..frame.n)
            .map(|_| (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        if gram_schmidt(&mut cols).is_ok() {
            return cols;
        }
    }
}

/// `Ω` on a random orthonormal frame together with its split, when graphical.
pub fn comass_sample<R: Rng + ?Sized>(
    frame: FrameIndexSet,
    rng: &mut R,
) -> (f64, Option<TangentPlaneSplit>) {
    let plane = random_plane(frame, rng);
    let omega = omega_of(&plane, frame.n);
    (omega, split_plane(&plane, frame).ok())
}
