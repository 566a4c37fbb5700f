use serde::Serialize;

use crate::{LabError, Result};

/// Horizontal/vertical split of an orthonormal frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FrameIndexSet {
    pub n: usize,
    pub m: usize,
}

impl FrameIndexSet {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n == 0 {
            return Err(LabError::Domain("horizontal dimension must be positive".into()));
        }
        Ok(Self { n, m })
    }

    pub fn dim(&self) -> usize {
        self.n + self.m
    }

    pub fn horizontal(&self) -> std::ops::Range<usize> {
        0..self.n
    }

    pub fn vertical(&self) -> std::ops::Range<usize> {
        self.n..self.n + self.m
    }

    pub fn is_horizontal(&self, a: usize) -> bool {
        a < self.n
    }

    /// Human-readable label, 1-based, with `n+μ` spelled out for vertical slots.
    pub fn label(&self, a: usize) -> String {
        if a < self.n {
            format!("{}", a + 1)
        } else {
            format!("n+{}", a - self.n + 1)
        }
    }
}

/// An almost complex structure that acts on frame vectors as a signed
/// permutation: `J e_a = sign[a] · e_{image[a]}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexStructure {
    pub image: Vec<usize>,
    pub sign: Vec<f64>,
}

impl ComplexStructure {
    /// `J e_μ = e_{n+μ}`, `J e_{n+μ} = −e_μ` on a frame of dimension `2n`.
    pub fn horizontal_to_vertical(n: usize) -> Self {
        let mut image = vec![0; 2 * n];
        let mut sign = vec![0.0; 2 * n];
        for a in 0..n {
            image[a] = a + n;
            sign[a] = 1.0;
            image[a + n] = a;
            sign[a + n] = -1.0;
        }
        Self { image, sign }
    }

    /// `J e_{2μ} = e_{2μ+1}`, `J e_{2μ+1} = −e_{2μ}`: the structure of a
    /// unitary coframe written as `ξ^μ = ω^{2μ} + i ω^{2μ+1}` (0-based).
    pub fn interleaved(complex_dim: usize) -> Self {
        let mut image = vec![0; 2 * complex_dim];
        let mut sign = vec![0.0; 2 * complex_dim];
        for mu in 0..complex_dim {
            image[2 * mu] = 2 * mu + 1;
            sign[2 * mu] = 1.0;
            image[2 * mu + 1] = 2 * mu;
            sign[2 * mu + 1] = -1.0;
        }
        Self { image, sign }
    }

    pub fn dim(&self) -> usize {
        self.image.len()
    }

    /// Checks `J² = −1`.
    pub fn is_complex(&self) -> bool {
        (0..self.dim()).all(|a| {
            let b = self.image[a];
            self.image[b] == a && self.sign[a] * self.sign[b] == -1.0
        })
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for (a, &va) in v.iter().enumerate() {
            out[self.image[a]] += self.sign[a] * va;
        }
        out
    }
}
