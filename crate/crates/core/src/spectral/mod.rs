//! Eigenvalues, pseudo-inverses, effective resistance, conductance bounds,
//! heat-kernel actions and JL sketches.

mod expm;
mod jl;

pub use expm::{exp_action, exp_action_dense, exp_action_operator, ExpActionOptions};
pub(crate) use expm::smallest_ritz_value;
pub use jl::{centered_gram_trace, jl_matrix, Embedding};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{build_laplacian, weighted_degrees, Graph, UnionFind, WeightVector};

/// Relative eigenvalue cutoff of the pseudo-inverse.
pub const PINV_CUTOFF: f64 = 1e-9;

/// Spectral summary of a weighted graph.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SpectralReport {
    pub lambda_gap: f64,
    pub d_max: f64,
    pub d_min: f64,
    pub w_max: f64,
    /// `½ λ_{n-1}` of the normalized Laplacian; 0 when a vertex is isolated.
    pub conductance_lb: f64,
}

pub fn spectral_report(g: &Graph, w: &WeightVector) -> Result<SpectralReport> {
    let l = build_laplacian(g, w)?;
    let d = weighted_degrees(g, w)?;
    let conductance_lb = match conductance_lower_bound(g, w) {
        Ok(v) => v,
        Err(Error::IsolatedVertex(_)) => 0.0,
        Err(e) => return Err(e),
    };
    Ok(SpectralReport {
        lambda_gap: lambda_n_minus_1(&l)?.max(0.0),
        d_max: d.iter().copied().fold(0.0, f64::max),
        d_min: d.iter().copied().fold(f64::INFINITY, f64::min),
        w_max: w.max(),
        conductance_lb,
    })
}

pub(crate) fn check_symmetric(l: &DMatrix<f64>) -> Result<()> {
    if !l.is_square() {
        return Err(Error::DimensionMismatch {
            expected: l.nrows(),
            actual: l.ncols(),
        });
    }
    let scale = l.amax().max(1.0);
    let mut worst = 0.0f64;
    for j in 0..l.ncols() {
        for i in 0..j {
            worst = worst.max((l[(i, j)] - l[(j, i)]).abs());
        }
    }
    if worst > 1e-10 * scale {
        return Err(Error::NotSymmetric(worst));
    }
    Ok(())
}

fn symmetrized(l: &DMatrix<f64>) -> DMatrix<f64> {
    (l + l.transpose()) * 0.5
}

/// Eigen-decomposition with eigenvalues sorted ascending.
pub(crate) fn sorted_eigen(l: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = l.nrows();
    let m = faer::Mat::<f64>::from_fn(n, n, |r, c| 0.5 * (l[(r, c)] + l[(c, r)]));
    let eig = m.selfadjoint_eigendecomposition(faer::Side::Lower);
    let (s, u) = (eig.s().column_vector(), eig.u());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s.read(a).total_cmp(&s.read(b)));
    let values = order.iter().map(|&i| s.read(i)).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| u.read(r, order[c]));
    (values, vectors)
}

/// Smallest eigenvalue of `L` on the complement of the all-ones vector.
///
/// The ones direction is lifted out of the way by adding `c·11ᵀ/n` with `c`
/// above every eigenvalue, so the result is the minimum eigenvalue of the
/// lifted matrix.
pub fn lambda_n_minus_1(l: &DMatrix<f64>) -> Result<f64> {
    check_symmetric(l)?;
    let n = l.nrows();
    if n < 2 {
        return Err(Error::DimensionMismatch { expected: 2, actual: n });
    }
    let lift = l.trace().abs() + l.amax() * n as f64 + 1.0;
    let m = symmetrized(l).add_scalar(lift / n as f64);
    let vals = m.symmetric_eigenvalues();
    Ok(vals.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Pseudo-inverse of a symmetric matrix through its eigen-decomposition.
#[derive(Debug, Clone)]
pub struct LaplacianPinv {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
    kernel_dim: usize,
}

impl LaplacianPinv {
    pub fn new(l: &DMatrix<f64>) -> Result<Self> {
        check_symmetric(l)?;
        let (mut values, vectors) = sorted_eigen(l);
        let lmax = values.iter().copied().fold(0.0f64, |a, b| a.max(b.abs()));
        let cut = PINV_CUTOFF * lmax;
        let mut kernel_dim = 0;
        for v in values.iter_mut() {
            if v.abs() <= cut {
                *v = 0.0;
                kernel_dim += 1;
            } else {
                *v = 1.0 / *v;
            }
        }
        Ok(Self {
            values,
            vectors,
            kernel_dim,
        })
    }

    pub fn kernel_dim(&self) -> usize {
        self.kernel_dim
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(v);
        let mut c = self.vectors.tr_mul(&x);
        for (ci, &s) in c.iter_mut().zip(&self.values) {
            *ci *= s;
        }
        (&self.vectors * c).as_slice().to_vec()
    }

    /// The dense pseudo-inverse matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.vectors.nrows(), self.vectors.ncols(), |r, c| {
            self.vectors[(r, c)] * self.values[c]
        });
        &scaled * self.vectors.transpose()
    }
}

/// `L† v` with eigenvalues below `1e-9·λ_max` treated as zero.
pub fn laplacian_pinv_apply(l: &DMatrix<f64>, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != l.nrows() {
        return Err(Error::DimensionMismatch {
            expected: l.nrows(),
            actual: v.len(),
        });
    }
    Ok(LaplacianPinv::new(l)?.apply(v))
}

/// Connected components of the off-diagonal support of a Laplacian.
fn require_connected_matrix(l: &DMatrix<f64>) -> Result<()> {
    let n = l.nrows();
    let mut uf = UnionFind::new(n);
    for j in 0..n {
        for i in 0..j {
            if l[(i, j)] != 0.0 {
                uf.union(i, j);
            }
        }
    }
    let labels: Vec<usize> = (0..n).map(|v| uf.find(v)).collect();
    if labels.iter().all(|&c| c == 0) {
        return Ok(());
    }
    let mut roots = labels.clone();
    roots.sort_unstable();
    roots.dedup();
    Err(Error::Disconnected {
        components: roots.len(),
        component: (0..n).filter(|&v| labels[v] == roots[1]).collect(),
    })
}

fn check_pair(n: usize, k: usize, l: usize) -> Result<()> {
    for v in [k, l] {
        if v >= n {
            return Err(Error::VertexOutOfRange { vertex: v, n });
        }
    }
    Ok(())
}

/// `Ω_kl = (e_k − e_l)ᵀ L† (e_k − e_l)`.
pub fn effective_resistance(l: &DMatrix<f64>, k: usize, j: usize) -> Result<f64> {
    check_symmetric(l)?;
    check_pair(l.nrows(), k, j)?;
    require_connected_matrix(l)?;
    if k == j {
        return Ok(0.0);
    }
    let pinv = LaplacianPinv::new(l)?;
    let mut chi = vec![0.0; l.nrows()];
    chi[k] = 1.0;
    chi[j] = -1.0;
    let x = pinv.apply(&chi);
    Ok((x[k] - x[j]).max(0.0))
}

/// `½ λ_{n-1}(D^{-1/2} L D^{-1/2})`, a lower bound on the conductance.
pub fn conductance_lower_bound(g: &Graph, w: &WeightVector) -> Result<f64> {
    let l = build_laplacian(g, w)?;
    let d = weighted_degrees(g, w)?;
    if let Some(v) = d.iter().position(|&x| x <= 0.0) {
        return Err(Error::IsolatedVertex(v));
    }
    let s: Vec<f64> = d.iter().map(|x| 1.0 / x.sqrt()).collect();
    let n = g.n();
    let norm = DMatrix::from_fn(n, n, |i, j| s[i] * l[(i, j)] * s[j]);
    // The kernel is spanned by D^{1/2}·1, so take the second-smallest eigenvalue.
    let mut vals: Vec<f64> = norm.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(0.5 * vals[1].max(0.0))
}

/// `Σ_e w_e |(e_k − e_l)ᵀ L_wz† (e_i − e_j)|` where `L_wz` carries the edge
/// weights `w_e z_e`.
pub fn congestion_sum(g: &Graph, w: &WeightVector, z: &[f64], k: usize, l: usize) -> Result<f64> {
    g.check_weights(w)?;
    if z.len() != g.m() {
        return Err(Error::DimensionMismatch {
            expected: g.m(),
            actual: z.len(),
        });
    }
    check_pair(g.n(), k, l)?;
    let wz = WeightVector::new(w.as_slice().iter().zip(z).map(|(a, b)| a * b).collect())?;
    let lwz = build_laplacian(g, &wz)?;
    require_connected_matrix(&lwz)?;
    if k == l {
        return Ok(0.0);
    }
    let mut chi = vec![0.0; g.n()];
    chi[k] = 1.0;
    chi[l] = -1.0;
    let x = LaplacianPinv::new(&lwz)?.apply(&chi);
    Ok(g.edges()
        .iter()
        .zip(w.as_slice())
        .map(|(&(i, j), &we)| we * (x[i] - x[j]).abs())
        .sum())
}
