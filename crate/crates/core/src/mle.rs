//! Weighted Bradley–Terry–Luce maximum likelihood.
//!
//! For an edge stored as `(j, i)` with `j < i`, the loss term is
//! `w_e (−y_ji (θ_i − θ_j) + log(1 + e^{θ_i − θ_j}))`, where `y_ji = 1 − y_e`
//! is the fraction of comparisons won by `i`.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::graph::{require_connected, Graph, WeightVector, DEFAULT_CONNECTIVITY_TOL};
use crate::sampling::{BtlInstance, ComparisonData};
use crate::spectral::LaplacianPinv;

/// Logistic function, evaluated without overflow.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^x)` without overflow.
pub fn log1pexp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Curvature `z = e^d / (1 + e^d)²` of one comparison at score gap `d`.
pub fn z_weight(d: f64) -> f64 {
    sigmoid(d) * sigmoid(-d)
}

/// Scores normalized to sum to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn centered(mut theta: Vec<f64>) -> Result<Self> {
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(invalid("scores must be finite"));
        }
        center(&mut theta);
        Ok(Self(theta))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for ScoreVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

fn center(x: &mut [f64]) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= mean);
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |a, v| a.max(v.abs()))
}

fn check_inputs(theta: &[f64], g: &Graph, data: &ComparisonData, w: &WeightVector) -> Result<()> {
    if theta.len() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            actual: theta.len(),
        });
    }
    data.check_graph(g)?;
    g.check_weights(w)
}

/// Weighted negative log-likelihood.
pub fn nll(theta: &[f64], g: &Graph, data: &ComparisonData, w: &WeightVector) -> Result<f64> {
    check_inputs(theta, g, data, w)?;
    let mut total = 0.0;
    for ((&(j, i), &y), &we) in g.edges().iter().zip(data.y()).zip(w.as_slice()) {
        if we == 0.0 {
            continue;
        }
        let d = theta[i] - theta[j];
        total += we * (-(1.0 - y) * d + log1pexp(d));
    }
    Ok(total)
}

/// Gradient of [`nll`]; orthogonal to the ones vector.
pub fn gradient(theta: &[f64], g: &Graph, data: &ComparisonData, w: &WeightVector) -> Result<Vec<f64>> {
    check_inputs(theta, g, data, w)?;
    let mut grad = vec![0.0; g.n()];
    for ((&(j, i), &y), &we) in g.edges().iter().zip(data.y()).zip(w.as_slice()) {
        if we == 0.0 {
            continue;
        }
        let r = we * (sigmoid(theta[i] - theta[j]) - (1.0 - y));
        grad[i] += r;
        grad[j] -= r;
    }
    Ok(grad)
}

/// Hessian of [`nll`]: the Laplacian with edge weights `w_e z_e(θ)`.
pub fn hessian_laplacian(theta: &[f64], g: &Graph, w: &WeightVector) -> Result<DMatrix<f64>> {
    g.check_weights(w)?;
    if theta.len() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            actual: theta.len(),
        });
    }
    let mut h = DMatrix::zeros(g.n(), g.n());
    for (&(j, i), &we) in g.edges().iter().zip(w.as_slice()) {
        let x = we * z_weight(theta[i] - theta[j]);
        h[(i, i)] += x;
        h[(j, j)] += x;
        h[(i, j)] -= x;
        h[(j, i)] -= x;
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    /// `θ ← θ − η L_wz(θ⁰)† ∇L(θ)` with the preconditioner fixed at the start.
    PrecondGd,
    /// Newton steps with the current Hessian and Armijo backtracking.
    DampedNewton,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub method: SolveMethod,
    /// Step size of the preconditioned gradient iteration.
    pub step: f64,
    pub grad_tol: f64,
    pub max_iters: usize,
    pub theta_init: Option<Vec<f64>>,
    /// `‖θ‖∞` above this aborts with [`Error::Divergence`].
    pub divergence_bound: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            method: SolveMethod::DampedNewton,
            step: 0.5,
            grad_tol: 1e-10,
            max_iters: 5000,
            theta_init: None,
            divergence_bound: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleSolution {
    pub theta: ScoreVector,
    pub converged: bool,
    pub iters: usize,
    pub grad_norm: f64,
    /// Loss after each accepted iterate, starting with the initial point.
    pub loss_trace: Vec<f64>,
}

/// Solves the weighted MLE.
///
/// Fails with [`Error::Disconnected`] when the edges with positive weight do
/// not connect all items, and with [`Error::NoFiniteMinimizer`] when some
/// group of items never beats the rest on such edges (the likelihood then
/// has no minimizer).
pub fn solve_mle(g: &Graph, data: &ComparisonData, w: &WeightVector, opts: &SolveOptions) -> Result<MleSolution> {
    data.check_graph(g)?;
    require_connected(g, w, DEFAULT_CONNECTIVITY_TOL)?;
    if !(opts.grad_tol > 0.0) {
        return Err(invalid("grad_tol must be > 0"));
    }
    if !(opts.step > 0.0 && opts.step <= 1.0) {
        return Err(invalid(format!("step must lie in (0, 1], got {}", opts.step)));
    }
    check_existence(g, data, w)?;
    let mut theta = match &opts.theta_init {
        Some(t) => ScoreVector::centered(t.clone())?.into_inner(),
        None => vec![0.0; g.n()],
    };
    if theta.len() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            actual: theta.len(),
        });
    }
    match opts.method {
        SolveMethod::DampedNewton => newton(g, data, w, opts, &mut theta),
        SolveMethod::PrecondGd => precond_gd(g, data, w, opts, &mut theta),
    }
}

/// Items `i` and `j` on an edge of positive weight are joined by an arc
/// `i → j` when `i` won at least once. A minimizer exists iff this digraph is
/// strongly connected.
fn check_existence(g: &Graph, data: &ComparisonData, w: &WeightVector) -> Result<()> {
    let n = g.n();
    let mut out = vec![Vec::new(); n];
    let mut inc = vec![Vec::new(); n];
    for ((&(j, i), &y), &we) in g.edges().iter().zip(data.y()).zip(w.as_slice()) {
        if we <= DEFAULT_CONNECTIVITY_TOL {
            continue;
        }
        if y > 0.0 {
            out[j].push(i);
            inc[i].push(j);
        }
        if y < 1.0 {
            out[i].push(j);
            inc[j].push(i);
        }
    }
    let reach = |adj: &[Vec<usize>]| {
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    };
    let fwd = reach(&out);
    if fwd.iter().any(|&s| !s) {
        let group = (0..n).filter(|&v| fwd[v]).collect();
        return Err(Error::NoFiniteMinimizer { group });
    }
    let back = reach(&inc);
    if back.iter().any(|&s| !s) {
        let group = (0..n).filter(|&v| !back[v]).collect();
        return Err(Error::NoFiniteMinimizer { group });
    }
    Ok(())
}

/// Solver for `H d = −g` with `g ⊥ 1`, returning the solution orthogonal to 1.
struct NewtonSystem {
    chol: Option<Cholesky<f64, nalgebra::Dyn>>,
    pinv: Option<LaplacianPinv>,
}

impl NewtonSystem {
    fn new(h: DMatrix<f64>) -> Result<Self> {
        let n = h.nrows();
        let s = (h.trace() / n as f64).max(f64::MIN_POSITIVE);
        let lifted = h.add_scalar(s / n as f64);
        match Cholesky::new(lifted) {
            Some(chol) => Ok(Self {
                chol: Some(chol),
                pinv: None,
            }),
            None => Ok(Self {
                chol: None,
                pinv: Some(LaplacianPinv::new(&h)?),
            }),
        }
    }

    fn solve(&self, grad: &[f64]) -> Vec<f64> {
        let mut d = match (&self.chol, &self.pinv) {
            (Some(c), _) => c.solve(&DVector::from_column_slice(grad)).as_slice().to_vec(),
            (None, Some(p)) => p.apply(grad),
            _ => unreachable!("one factorization is always present"),
        };
        d.iter_mut().for_each(|x| *x = -*x);
        center(&mut d);
        d
    }
}

fn check_bound(theta: &[f64], opts: &SolveOptions, iters: usize) -> Result<()> {
    let norm = norm_inf(theta);
    if !(norm <= opts.divergence_bound) {
        return Err(Error::Divergence {
            norm,
            bound: opts.divergence_bound,
            iters,
        });
    }
    Ok(())
}

fn newton(g: &Graph, data: &ComparisonData, w: &WeightVector, opts: &SolveOptions, theta: &mut Vec<f64>) -> Result<MleSolution> {
    let mut f = nll(theta, g, data, w)?;
    let mut grad = gradient(theta, g, data, w)?;
    let mut gn = norm2(&grad);
    let mut trace = vec![f];
    let mut iters = 0;
    let mut converged = gn <= opts.grad_tol;
    while !converged && iters < opts.max_iters {
        check_bound(theta, opts, iters)?;
        let d = NewtonSystem::new(hessian_laplacian(theta, g, w)?)?.solve(&grad);
        let slope: f64 = grad.iter().zip(&d).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            break;
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-12 {
            let cand: Vec<f64> = theta.iter().zip(&d).map(|(t, di)| t + alpha * di).collect();
            let fc = nll(&cand, g, data, w)?;
            if fc <= f + 1e-4 * alpha * slope {
                accepted = Some((cand, fc, None));
                break;
            }
            // Below the resolution of the loss, accept on gradient decrease.
            if alpha * slope.abs() <= 1e-14 * (1.0 + f.abs()) && fc <= f + 1e-12 * (1.0 + f.abs()) {
                let gc = gradient(&cand, g, data, w)?;
                if norm2(&gc) < gn {
                    accepted = Some((cand, fc, Some(gc)));
                }
                break;
            }
            alpha *= 0.5;
        }
        let Some((mut cand, fc, gc)) = accepted else {
            break;
        };
        center(&mut cand);
        *theta = cand;
        f = fc;
        grad = match gc {
            Some(gc) => gc,
            None => gradient(theta, g, data, w)?,
        };
        gn = norm2(&grad);
        trace.push(f);
        iters += 1;
        converged = gn <= opts.grad_tol;
    }
    check_bound(theta, opts, iters)?;
    Ok(MleSolution {
        theta: ScoreVector::centered(theta.clone())?,
        converged,
        iters,
        grad_norm: gn,
        loss_trace: trace,
    })
}

fn precond_gd(g: &Graph, data: &ComparisonData, w: &WeightVector, opts: &SolveOptions, theta: &mut Vec<f64>) -> Result<MleSolution> {
    let system = NewtonSystem::new(hessian_laplacian(theta, g, w)?)?;
    let mut grad = gradient(theta, g, data, w)?;
    let mut gn = norm2(&grad);
    let mut trace = vec![nll(theta, g, data, w)?];
    let mut iters = 0;
    while gn > opts.grad_tol && iters < opts.max_iters {
        let d = system.solve(&grad);
        for (t, di) in theta.iter_mut().zip(&d) {
            *t += opts.step * di;
        }
        iters += 1;
        check_bound(theta, opts, iters)?;
        grad = gradient(theta, g, data, w)?;
        gn = norm2(&grad);
        trace.push(nll(theta, g, data, w)?);
    }
    Ok(MleSolution {
        theta: ScoreVector::centered(theta.clone())?,
        converged: gn <= opts.grad_tol,
        iters,
        grad_norm: gn,
        loss_trace: trace,
    })
}

/// Indices of the `k` largest scores (ties go to the lower index), sorted.
pub fn top_k(theta: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..theta.len()).collect();
    order.sort_by(|&a, &b| theta[b].total_cmp(&theta[a]).then(a.cmp(&b)));
    let mut top: Vec<usize> = order.into_iter().take(k).collect();
    top.sort_unstable();
    top
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ErrorMetrics {
    /// `‖θ̂ − θ*‖∞` after centering `θ̂`.
    pub linf: f64,
    /// `max_{k,l} |(θ̂_k − θ̂_l) − (θ*_k − θ*_l)|`.
    pub pairwise_linf: f64,
    /// Fraction of the true top-K recovered by the top-K of `θ̂`.
    pub topk_accuracy: f64,
}

pub fn error_metrics(theta_hat: &[f64], b: &BtlInstance, k: usize) -> Result<ErrorMetrics> {
    if theta_hat.len() != b.n() {
        return Err(Error::DimensionMismatch {
            expected: b.n(),
            actual: theta_hat.len(),
        });
    }
    if k == 0 || k > b.n() {
        return Err(invalid(format!("K must satisfy 1 <= K <= n, got {k}")));
    }
    let mut hat = theta_hat.to_vec();
    center(&mut hat);
    let diff: Vec<f64> = hat.iter().zip(b.theta_star()).map(|(a, s)| a - s).collect();
    let hi = diff.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = diff.iter().copied().fold(f64::INFINITY, f64::min);
    let truth = top_k(b.theta_star(), k);
    let found = top_k(&hat, k);
    let hits = found.iter().filter(|v| truth.binary_search(v).is_ok()).count();
    Ok(ErrorMetrics {
        linf: norm_inf(&diff),
        pairwise_linf: hi - lo,
        topk_accuracy: hits as f64 / k as f64,
    })
}

/// Constants of the entrywise bounds; both default to the unit placeholder 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BqConstants {
    pub c: f64,
    pub c2: f64,
}

impl Default for BqConstants {
    fn default() -> Self {
        Self { c: 1.0, c2: 1.0 }
    }
}

/// `B = C κ √(w_max ln n / (L λ))` and
/// `Q = C₂ κ³ w_max d_max² ln² n / (L λ³)`, with unit constants.
pub fn bq_diagnostics(g: &Graph, w: &WeightVector, kappa: f64, reps: usize, lambda_gap: f64) -> Result<(f64, f64)> {
    bq_diagnostics_with(g, w, kappa, reps, lambda_gap, BqConstants::default())
}

pub fn bq_diagnostics_with(
    g: &Graph,
    w: &WeightVector,
    kappa: f64,
    reps: usize,
    lambda_gap: f64,
    k: BqConstants,
) -> Result<(f64, f64)> {
    if !(lambda_gap > 0.0) {
        return Err(invalid(format!("spectral gap must be > 0, got {lambda_gap}")));
    }
    if reps == 0 {
        return Err(invalid("repetition count L must be >= 1"));
    }
    let d_max = crate::graph::weighted_degrees(g, w)?.into_iter().fold(0.0, f64::max);
    let w_max = w.max();
    let ln_n = (g.n() as f64).ln();
    let l = reps as f64;
    let b = k.c * kappa * (w_max * ln_n / (l * lambda_gap)).sqrt();
    let q = k.c2 * kappa.powi(3) * w_max * d_max * d_max * ln_n * ln_n / (l * lambda_gap.powi(3));
    Ok((b, q))
}
