use super::forms::det_real;
use super::frame::FrameIndexSet;

/// Connection coefficients `Γ[a][b][c] = ω_a^b(e_c)` at a point, together
/// with their frame derivatives `dΓ[a][b][c][d] = e_d(ω_a^b(e_c))`.
///
/// This is enough to differentiate the horizontal volume form
/// `Ω = ω^0 ∧ … ∧ ω^{n-1}` twice. Only the mixed (vertical lower index,
/// horizontal upper index) derivatives reach `∇²Ω`, so the derivatives of
/// the gauge blocks may be left at zero.
#[derive(Debug, Clone)]
pub struct ConnectionSample {
    pub frame: FrameIndexSet,
    gamma: Vec<f64>,
    dgamma: Vec<f64>,
}

impl ConnectionSample {
    pub fn new(frame: FrameIndexSet) -> Self {
        let d = frame.dim();
        Self {
            frame,
            gamma: vec![0.0; d * d * d],
            dgamma: vec![0.0; d * d * d * d],
        }
    }

    fn dim(&self) -> usize {
        self.frame.dim()
    }

    #[inline]
    pub fn gamma(&self, a: usize, b: usize, c: usize) -> f64 {
        let d = self.dim();
        self.gamma[(a * d + b) * d + c]
    }

    #[inline]
    pub fn dgamma(&self, a: usize, b: usize, c: usize, e: usize) -> f64 {
        let d = self.dim();
        self.dgamma[((a * d + b) * d + c) * d + e]
    }

    /// Adds `v` to `ω_a^b(e_c)` and `−v` to `ω_b^a(e_c)`.
    pub fn add(&mut self, a: usize, b: usize, c: usize, v: f64) {
        let d = self.dim();
        self.gamma[(a * d + b) * d + c] += v;
        self.gamma[(b * d + a) * d + c] -= v;
    }

    /// Adds `v` to `e_e(ω_a^b(e_c))`, antisymmetrically in `a, b`.
    pub fn add_derivative(&mut self, a: usize, b: usize, c: usize, e: usize, v: f64) {
        let d = self.dim();
        self.dgamma[((a * d + b) * d + c) * d + e] += v;
        self.dgamma[((b * d + a) * d + c) * d + e] -= v;
    }

    /// Sets `ω_a^b(e_c)` alone; callers filling a full table check the
    /// result with [`ConnectionSample::skew_defect`].
    pub fn set(&mut self, a: usize, b: usize, c: usize, v: f64) {
        let d = self.dim();
        self.gamma[(a * d + b) * d + c] = v;
    }

    pub fn set_derivative(&mut self, a: usize, b: usize, c: usize, e: usize, v: f64) {
        let d = self.dim();
        self.dgamma[((a * d + b) * d + c) * d + e] = v;
    }

    /// Largest deviation from `ω_a^b = −ω_b^a`.
    pub fn skew_defect(&self) -> f64 {
        let d = self.dim();
        let mut m: f64 = 0.0;
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    m = m.max((self.gamma(a, b, c) + self.gamma(b, a, c)).abs());
                }
            }
        }
        m
    }

    /// Matrix `G_X[a][b] = ω_a^b(X)`.
    fn contract(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut g = vec![0.0; d * d];
        for a in 0..d {
            for b in 0..d {
                g[a * d + b] = (0..d).map(|c| self.gamma(a, b, c) * x[c]).sum();
            }
        }
        g
    }

    fn contract2(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut g = vec![0.0; d * d];
        for a in 0..d {
            for b in 0..d {
                let mut acc = 0.0;
                for c in 0..d {
                    if y[c] == 0.0 {
                        continue;
                    }
                    for e in 0..d {
                        acc += self.dgamma(a, b, c, e) * y[c] * x[e];
                    }
                }
                g[a * d + b] = acc;
            }
        }
        g
    }

    /// `(Gᵀ v)_b = Σ_a v^a G[a][b]`: the derivative of a vector with
    /// constant frame components.
    fn act(&self, g: &[f64], v: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|b| (0..d).map(|a| v[a] * g[a * d + b]).sum())
            .collect()
    }

    /// `Ω(v_0, …, v_{n-1})`.
    pub fn omega(&self, vs: &[&[f64]]) -> f64 {
        let n = self.frame.n;
        let mut m = Vec::with_capacity(n * n);
        for i in 0..n {
            for v in vs {
                m.push(v[i]);
            }
        }
        det_real(&mut m, n)
    }

    fn omega_replaced(&self, vs: &[&[f64]], s: usize, w: &[f64]) -> f64 {
        let mut refs: Vec<&[f64]> = vs.to_vec();
        refs[s] = w;
        self.omega(&refs)
    }

    /// `(∇_X Ω)(v_0, …, v_{n-1})`.
    pub fn grad_omega(&self, x: &[f64], vs: &[&[f64]]) -> f64 {
        let g = self.contract(x);
        -(0..vs.len())
            .map(|s| {
                let w = self.act(&g, vs[s]);
                self.omega_replaced(vs, s, &w)
            })
            .sum::<f64>()
    }

    /// `(∇²_{X,Y} Ω)(v_0, …, v_{n-1})` with `X` the outer slot.
    pub fn hess_omega(&self, x: &[f64], y: &[f64], vs: &[&[f64]]) -> f64 {
        let gx = self.contract(x);
        let dg = self.contract2(x, y);
        let mut total = 0.0;
        for s in 0..vs.len() {
            let w = self.act(&dg, vs[s]);
            total -= self.omega_replaced(vs, s, &w);
        }
        let nabla_x_y = self.act(&gx, y);
        total -= self.grad_omega(&nabla_x_y, vs);
        for s in 0..vs.len() {
            let w = self.act(&gx, vs[s]);
            let mut refs: Vec<&[f64]> = vs.to_vec();
            refs[s] = &w;
            total -= self.grad_omega(y, &refs);
        }
        total
    }

    /// `Σ_k (∇²_{v_k, v_k} Ω)(v_0, …, v_{n-1})`.
    pub fn hess_trace(&self, vs: &[Vec<f64>]) -> f64 {
        let refs: Vec<&[f64]> = vs.iter().map(|v| v.as_slice()).collect();
        vs.iter().map(|v| self.hess_omega(v, v, &refs)).sum()
    }

    /// Norm of the `n`-form `∇_X Ω` in the metric induced by the frame.
    pub fn grad_omega_norm(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let n = self.frame.n;
        let mut acc = 0.0;
        for idx in increasing_tuples(d, n) {
            let basis: Vec<Vec<f64>> = idx
                .iter()
                .map(|&i| {
                    let mut e = vec![0.0; d];
                    e[i] = 1.0;
                    e
                })
                .collect();
            let refs: Vec<&[f64]> = basis.iter().map(|v| v.as_slice()).collect();
            let v = self.grad_omega(x, &refs);
            acc += v * v;
        }
        acc.sqrt()
    }
}

/// All strictly increasing `k`-tuples from `0..d`.
pub fn increasing_tuples(d: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, d: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..d {
            cur.push(i);
            rec(i + 1, d, k, cur, out);
            cur.pop();
        }
    }
    rec(0, d, k, &mut cur, &mut out);
    out
}
