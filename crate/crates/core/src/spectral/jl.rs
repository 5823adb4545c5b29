//! Random sign sketches and the normalized Gram factor used by MMWU.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{invalid, Result};
use crate::rng::{stream, Domain};

/// `n × k` matrix with iid entries uniform on `{±1/√k}`.
pub fn jl_matrix(n: usize, k: usize, seed: u64) -> Result<DMatrix<f64>> {
    if k == 0 {
        return Err(invalid("sketch dimension k must be >= 1"));
    }
    let mut rng = stream(seed, Domain::Sketch, &[n as u64, k as u64]);
    let s = 1.0 / (k as f64).sqrt();
    let mut m = DMatrix::zeros(n, k);
    let mut bits = 0u64;
    for (idx, x) in m.iter_mut().enumerate() {
        if idx % 64 == 0 {
            bits = rng.gen();
        }
        *x = if bits & 1 == 1 { s } else { -s };
        bits >>= 1;
    }
    Ok(m)
}

/// `⟨Π, UUᵀ⟩ = Tr(UUᵀ) − ‖Uᵀ1‖²/n`, where `Π` projects off the ones vector.
pub fn centered_gram_trace(u: &DMatrix<f64>) -> f64 {
    let n = u.nrows() as f64;
    u.column_iter()
        .map(|c| {
            let s: f64 = c.iter().sum();
            c.norm_squared() - s * s / n
        })
        .sum()
}

/// Gram factor `V` of a density-matrix candidate `X = VVᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    matrix: DMatrix<f64>,
}

impl Embedding {
    /// Wraps `v` as is.
    pub fn new(matrix: DMatrix<f64>) -> Self {
        Self { matrix }
    }

    /// Scales `u` so that `⟨Π, VVᵀ⟩ = 1`.
    pub fn normalized(u: DMatrix<f64>) -> Result<Self> {
        let t = centered_gram_trace(&u);
        if !(t > 0.0 && t.is_finite()) {
            return Err(invalid(format!("cannot normalize embedding with centered trace {t}")));
        }
        Ok(Self {
            matrix: u / t.sqrt(),
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn columns(&self) -> usize {
        self.matrix.ncols()
    }
}
