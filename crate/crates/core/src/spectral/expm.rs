//! Action of the heat kernel `exp(−η L_w)` on a block of vectors.
//!
//! The matrix-free path runs one Lanczos process per column with full
//! reorthogonalization and grows the Krylov space until the projected
//! exponential stops changing. The dense path diagonalizes `L_w` and is used
//! as the reference.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use super::sorted_eigen;
use crate::error::{invalid, Error, Result};
use crate::graph::{Graph, LaplacianOperator, WeightVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpActionOptions {
    /// Target error per column, relative to the column norm (or to the
    /// output norm when that is larger).
    pub delta: f64,
    /// Computes `exp(−η (L − shift·I))` instead. Useful to keep values in
    /// range when the spectrum of `ηL` is large.
    pub shift: f64,
    /// Projects inputs and the Krylov basis onto the complement of the
    /// all-ones vector.
    pub deflate_ones: bool,
    /// Largest Krylov dimension allowed; defaults to `n`.
    pub max_dim: Option<usize>,
}

impl ExpActionOptions {
    pub fn new(delta: f64) -> Self {
        Self {
            delta,
            shift: 0.0,
            deflate_ones: false,
            max_dim: None,
        }
    }
}

/// `exp(−η L_w) V0`, column by column, with error at most `delta·‖V0[:,c]‖`.
pub fn exp_action(g: &Graph, w: &WeightVector, eta: f64, v0: &DMatrix<f64>, delta: f64) -> Result<DMatrix<f64>> {
    let op = LaplacianOperator::new(g, w)?;
    exp_action_operator(&op, eta, v0, &ExpActionOptions::new(delta))
}

pub fn exp_action_operator(
    op: &LaplacianOperator,
    eta: f64,
    v0: &DMatrix<f64>,
    opts: &ExpActionOptions,
) -> Result<DMatrix<f64>> {
    let n = op.n();
    if v0.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: v0.nrows(),
        });
    }
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(invalid(format!("eta must be finite and >= 0, got {eta}")));
    }
    if !(opts.delta > 0.0) {
        return Err(invalid(format!("delta must be > 0, got {}", opts.delta)));
    }
    let cols: Vec<Vec<f64>> = (0..v0.ncols())
        .into_par_iter()
        .map(|c| lanczos_column(op, eta, v0.column(c).as_slice(), opts))
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(n, v0.ncols(), |r, c| cols[c][r]))
}

/// Dense reference: `Q exp(−ηΛ) Qᵀ V0`.
pub fn exp_action_dense(l: &DMatrix<f64>, eta: f64, v0: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    super::check_symmetric(l)?;
    if v0.nrows() != l.nrows() {
        return Err(Error::DimensionMismatch {
            expected: l.nrows(),
            actual: v0.nrows(),
        });
    }
    let (vals, q) = sorted_eigen(l);
    let mut c = q.tr_mul(v0);
    for (r, &lam) in vals.iter().enumerate() {
        let f = (-eta * lam).exp();
        c.row_mut(r).scale_mut(f);
    }
    Ok(q * c)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn remove_mean(x: &mut [f64]) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= mean);
}

/// First column of `exp(−T)` for the symmetric tridiagonal `T`.
fn expm_tridiag_e1(alpha: &[f64], beta: &[f64]) -> Vec<f64> {
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    (0..m)
        .map(|i| {
            (0..m)
                .map(|k| eig.eigenvectors[(i, k)] * (-eig.eigenvalues[k]).exp() * eig.eigenvectors[(0, k)])
                .sum()
        })
        .collect()
}

fn lanczos_column(op: &LaplacianOperator, eta: f64, v: &[f64], opts: &ExpActionOptions) -> Result<Vec<f64>> {
    let n = op.n();
    let mut start = v.to_vec();
    if opts.deflate_ones {
        remove_mean(&mut start);
    }
    let beta0 = dot(&start, &start).sqrt();
    if beta0 == 0.0 || eta == 0.0 {
        return Ok(start);
    }
    let max_dim = opts.max_dim.unwrap_or(n).clamp(1, n);
    let scale = eta * (op.norm_bound() + opts.shift.abs());
    let tiny = 1e-12 * (1.0 + scale);

    let mut basis: Vec<Vec<f64>> = vec![start.iter().map(|x| x / beta0).collect()];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut prev: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let y = loop {
        let j = basis.len() - 1;
        op.apply(&basis[j], &mut w);
        for (wi, qi) in w.iter_mut().zip(&basis[j]) {
            *wi = eta * (*wi - opts.shift * qi);
        }
        let a = dot(&basis[j], &w);
        alpha.push(a);
        axpy(-a, &basis[j], &mut w);
        if j > 0 {
            axpy(-beta[j - 1], &basis[j - 1], &mut w);
        }
        for _ in 0..2 {
            if opts.deflate_ones {
                remove_mean(&mut w);
            }
            for q in &basis {
                let c = dot(q, &w);
                axpy(-c, q, &mut w);
            }
        }
        let b = dot(&w, &w).sqrt();
        let m = alpha.len();
        let y = expm_tridiag_e1(&alpha, &beta);
        let ynorm = dot(&y, &y).sqrt().max(1.0);
        let change = y
            .iter()
            .enumerate()
            .map(|(i, yi)| (yi - prev.get(i).copied().unwrap_or(0.0)).powi(2))
            .sum::<f64>()
            .sqrt();
        let residual = b * y[m - 1].abs();
        if b <= tiny {
            break y;
        }
        let target = opts.delta / 10.0 * ynorm;
        if m >= 2 && change <= target && residual <= target {
            break y;
        }
        if m >= max_dim {
            if residual <= opts.delta * ynorm {
                break y;
            }
            return Err(Error::ExpActionNotConverged {
                delta: opts.delta,
                residual: residual / ynorm,
                dim: m,
            });
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
        prev = y;
    };
    let mut out = vec![0.0; n];
    for (q, &c) in basis.iter().zip(&y) {
        axpy(beta0 * c, q, &mut out);
    }
    Ok(out)
}

/// Smallest Ritz value of `L` on the complement of the ones vector after at
/// most `steps` Lanczos steps from `start`. It is an upper bound on
/// `λ_{n-1}(L)`.
pub(crate) fn smallest_ritz_value(op: &LaplacianOperator, start: &[f64], steps: usize) -> Result<f64> {
    let n = op.n();
    let mut q = start.to_vec();
    remove_mean(&mut q);
    let norm = dot(&q, &q).sqrt();
    if norm == 0.0 {
        return Err(invalid("Lanczos start vector is parallel to the ones vector"));
    }
    q.iter_mut().for_each(|x| *x /= norm);
    let tiny = 1e-12 * (1.0 + op.norm_bound());
    let mut basis = vec![q];
    let mut alpha = Vec::new();
    let mut beta = Vec::new();
    let mut w = vec![0.0; n];
    for j in 0..steps.clamp(1, n - 1) {
        op.apply(&basis[j], &mut w);
        let a = dot(&basis[j], &w);
        alpha.push(a);
        for _ in 0..2 {
            remove_mean(&mut w);
            for q in &basis {
                let c = dot(q, &w);
                axpy(-c, q, &mut w);
            }
        }
        let b = dot(&w, &w).sqrt();
        if b <= tiny || j + 1 == steps.clamp(1, n - 1) {
            break;
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i.abs_diff(j) == 1 {
            beta[i.min(j)]
        } else {
            0.0
        }
    });
    Ok(t.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min))
}
