use num_complex::Complex64;

/// Determinant by partial pivoting; `m` is row-major `k × k`.
pub fn det_real(m: &mut [f64], k: usize) -> f64 {
    let mut det = 1.0;
    for col in 0..k {
        let mut piv = col;
        for row in col + 1..k {
            if m[row * k + col].abs() > m[piv * k + col].abs() {
                piv = row;
            }
        }
        if m[piv * k + col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            for c in 0..k {
                m.swap(col * k + c, piv * k + c);
            }
            det = -det;
        }
        let p = m[col * k + col];
        det *= p;
        for row in col + 1..k {
            let f = m[row * k + col] / p;
            if f != 0.0 {
                for c in col..k {
                    m[row * k + c] -= f * m[col * k + c];
                }
            }
        }
    }
    det
}

pub fn det_complex(m: &mut [Complex64], k: usize) -> Complex64 {
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..k {
        let mut piv = col;
        for row in col + 1..k {
            if m[row * k + col].norm() > m[piv * k + col].norm() {
                piv = row;
            }
        }
        if m[piv * k + col].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if piv != col {
            for c in 0..k {
                m.swap(col * k + c, piv * k + c);
            }
            det = -det;
        }
        let p = m[col * k + col];
        det *= p;
        for row in col + 1..k {
            let f = m[row * k + col] / p;
            for c in col..k {
                let v = m[col * k + c];
                m[row * k + c] -= f * v;
            }
        }
    }
    det
}

/// A table of complex covectors in frame components, addressed by label.
/// Symbolic forms refer to covectors by label only.
#[derive(Debug, Clone)]
pub struct Covectors {
    dim: usize,
    rows: Vec<Vec<Complex64>>,
}

impl Covectors {
    pub fn new(dim: usize) -> Self {
        Self { dim, rows: Vec::new() }
    }

    /// The real coframe `ω^0, …, ω^{dim-1}` as labels `0..dim`.
    pub fn real_coframe(dim: usize) -> Self {
        let mut t = Self::new(dim);
        for a in 0..dim {
            let mut row = vec![Complex64::new(0.0, 0.0); dim];
            row[a] = Complex64::new(1.0, 0.0);
            t.push(row);
        }
        t
    }

    pub fn push(&mut self, row: Vec<Complex64>) -> usize {
        assert_eq!(row.len(), self.dim);
        self.rows.push(row);
        self.rows.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn eval(&self, label: usize, v: &[f64]) -> Complex64 {
        self.rows[label]
            .iter()
            .zip(v)
            .fold(Complex64::new(0.0, 0.0), |acc, (c, x)| acc + c * x)
    }
}

/// `sign · α_{l_0} ∧ … ∧ α_{l_{k-1}}` for covector labels `l_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Wedge {
    pub sign: f64,
    pub labels: Vec<usize>,
}

impl Wedge {
    pub fn new(labels: Vec<usize>) -> Self {
        Self { sign: 1.0, labels }
    }

    pub fn degree(&self) -> usize {
        self.labels.len()
    }

    /// Interior product with the vector dual to `label`, assuming the labels
    /// in the wedge are dual to a basis containing that vector. Returns `None`
    /// when the label does not occur.
    pub fn interior(&self, label: usize) -> Option<Self> {
        let pos = self.labels.iter().position(|&l| l == label)?;
        let mut labels = self.labels.clone();
        labels.remove(pos);
        let sign = if pos % 2 == 0 { self.sign } else { -self.sign };
        Some(Self { sign, labels })
    }

    /// `α_label ∧ self`.
    pub fn prepend(&self, label: usize) -> Self {
        let mut labels = Vec::with_capacity(self.labels.len() + 1);
        labels.push(label);
        labels.extend_from_slice(&self.labels);
        Self {
            sign: self.sign,
            labels,
        }
    }

    /// `self ∧ other`.
    pub fn concat(&self, other: &Wedge) -> Self {
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Self {
            sign: self.sign * other.sign,
            labels,
        }
    }

    /// Relabels every factor, keeping order and sign.
    pub fn map_labels(&self, f: impl Fn(usize) -> usize) -> Self {
        Self {
            sign: self.sign,
            labels: self.labels.iter().map(|&l| f(l)).collect(),
        }
    }

    pub fn eval(&self, table: &Covectors, vs: &[Vec<f64>]) -> Complex64 {
        let k = self.labels.len();
        assert_eq!(k, vs.len(), "wedge degree must match the number of vectors");
        if k == 0 {
            return Complex64::new(self.sign, 0.0);
        }
        let mut m = Vec::with_capacity(k * k);
        for &l in &self.labels {
            for v in vs {
                m.push(table.eval(l, v));
            }
        }
        det_complex(&mut m, k) * self.sign
    }
}

/// A scalar multiple of a wedge; building block for symbolic forms.
#[derive(Debug, Clone)]
pub struct FormTerm {
    pub coeff: Complex64,
    pub form: Wedge,
}

/// `coeff · α_dir ⊗ form`, a term of a form-valued 1-tensor such as `∇Ω`.
#[derive(Debug, Clone)]
pub struct GradTerm {
    pub coeff: Complex64,
    pub dir: usize,
    pub form: Wedge,
}

/// `coeff · (α_first ⊗ α_second) ⊗ form`, a term of `∇²Ω`; the first factor
/// is the outer differentiation slot.
#[derive(Debug, Clone)]
pub struct HessTerm {
    pub coeff: Complex64,
    pub first: usize,
    pub second: usize,
    pub form: Wedge,
}

impl GradTerm {
    pub fn sum_eval(terms: &[GradTerm], table: &Covectors, x: &[f64], vs: &[Vec<f64>]) -> Complex64 {
        terms.iter().fold(Complex64::new(0.0, 0.0), |acc, t| {
            let d = table.eval(t.dir, x);
            if d.norm() == 0.0 {
                acc
            } else {
                acc + t.coeff * d * t.form.eval(table, vs)
            }
        })
    }
}

impl HessTerm {
    /// `Σ_k T(v_k, v_k; v_0, …, v_{n-1})`, the trace over the plane basis.
    pub fn sum_trace(terms: &[HessTerm], table: &Covectors, vs: &[Vec<f64>]) -> Complex64 {
        terms.iter().fold(Complex64::new(0.0, 0.0), |acc, t| {
            let tr = vs.iter().fold(Complex64::new(0.0, 0.0), |s, v| {
                s + table.eval(t.first, v) * table.eval(t.second, v)
            });
            if tr.norm() == 0.0 {
                acc
            } else {
                acc + t.coeff * tr * t.form.eval(table, vs)
            }
        })
    }
}
