//! Matrix multiplicative weights for `max_{w ∈ F} λ_{n-1}(L_w)`.
//!
//! Round `t` holds the density matrix `X_t ∝ exp(−η S_t)` on the complement
//! of the ones vector, where `S_t` is the Laplacian of the cumulative
//! responses. The oracle answers with a feasible `ŵ_t` that (approximately)
//! maximizes `⟨L_ŵ, X_t⟩`, and the output is the average response.
//!
//! `X_t` is only accessed through edge gains `⟨L_e, X_t⟩ = ‖a_i − a_j‖²` for a
//! factor `X_t = AAᵀ`. With a JL sketch `A = exp(−ηS_t/2)·R/√k` and
//! `k < n` columns, the heat kernel is applied with Lanczos. When the sketch
//! would have at least `n` columns, `A` is taken from an eigendecomposition
//! of `S_t` instead, which is cheaper and exact.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::graph::{build_laplacian, degrees_from_slice, Graph, LaplacianOperator, WeightVector};
use crate::oracles::{approx_packing_oracle, edge_gains, greedy_b_matching, GainVector};
use crate::rng::{derive_seed, Domain};
use crate::spectral::{
    exp_action_operator, jl_matrix, lambda_n_minus_1, sorted_eigen, smallest_ritz_value, Embedding,
    ExpActionOptions,
};

/// Slack allowed in the feasibility checks.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    /// Greedy maximal b-matching (½-approximate).
    Greedy,
    /// Optimal fractional b-matching; falls back to greedy if the flow solver
    /// runs out of budget.
    Lp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SketchMode {
    /// Exact factor when `k ≥ n`, JL sketch otherwise.
    Auto,
    Jl,
    Exact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmwuParams {
    pub n: usize,
    pub p: f64,
    pub eps: f64,
    pub eta: f64,
    pub iterations: usize,
    pub k: usize,
    pub oracle: OracleKind,
    pub sketch: SketchMode,
    pub seed: u64,
    pub exp_delta: f64,
}

/// Default JL constant in `k = ⌈c·ln n / ε²⌉`.
pub const DEFAULT_C_JL: f64 = 24.0;

impl MmwuParams {
    /// `η = ε/(4pn)`, `T = ⌈8 ln n / ε²⌉`, `k = ⌈24 ln n / ε²⌉`.
    pub fn new(n: usize, p: f64, eps: f64, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("n must be >= 2, got {n}")));
        }
        if !(eps > 0.0 && eps <= 0.5) {
            return Err(invalid(format!("eps must lie in (0, 1/2], got {eps}")));
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(invalid(format!("p must lie in (0, 1], got {p}")));
        }
        let ln_n = (n as f64).ln();
        let params = Self {
            n,
            p,
            eps,
            eta: eps / (4.0 * p * n as f64),
            iterations: ((8.0 * ln_n / (eps * eps)).ceil() as usize).max(1),
            k: ((DEFAULT_C_JL * ln_n / (eps * eps)).ceil() as usize).max(1),
            oracle: OracleKind::Greedy,
            sketch: SketchMode::Auto,
            seed,
            exp_delta: 1e-6,
        };
        params.validate()?;
        Ok(params)
    }

    /// Recomputes `k` from a different JL constant.
    pub fn with_c_jl(mut self, c_jl: f64) -> Self {
        let ln_n = (self.n as f64).ln();
        self.k = ((c_jl * ln_n / (self.eps * self.eps)).ceil() as usize).max(1);
        self
    }

    pub fn with_oracle(mut self, oracle: OracleKind) -> Self {
        self.oracle = oracle;
        self
    }

    pub fn with_sketch(mut self, sketch: SketchMode) -> Self {
        self.sketch = sketch;
        self
    }

    pub fn with_iterations(mut self, t: usize) -> Self {
        self.iterations = t;
        self
    }

    /// Per-vertex degree cap `2pn` of the feasible set.
    pub fn degree_cap(&self) -> f64 {
        2.0 * self.p * self.n as f64
    }

    /// Integer degree budget `b` handed to the b-matching oracles: the
    /// largest integer not above `2pn`.
    pub fn budget(&self) -> usize {
        (self.degree_cap() + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(invalid(format!("eta must be positive, got {}", self.eta)));
        }
        if self.iterations == 0 || self.k == 0 {
            return Err(invalid("iteration count T and sketch size k must be >= 1"));
        }
        if self.budget() == 0 {
            return Err(invalid(format!(
                "degree budget 2pn = {} is below 1; p is too small for n = {}",
                self.degree_cap(),
                self.n
            )));
        }
        if !(self.exp_delta > 0.0) {
            return Err(invalid("exp_delta must be > 0"));
        }
        Ok(())
    }

    fn uses_exact(&self) -> bool {
        match self.sketch {
            SketchMode::Exact => true,
            SketchMode::Jl => false,
            SketchMode::Auto => self.k >= self.n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReweightReport {
    pub w_out: WeightVector,
    pub lambda_gap: f64,
    pub feasible: bool,
    /// `⟨L_ŵ, X_t⟩` as seen by the oracle, per round.
    pub per_iter_loss: Vec<f64>,
    pub wall_time: Duration,
    pub iterations: usize,
    /// Whether the exact factor was used instead of the JL sketch.
    pub exact_density: bool,
    /// Rounds in which the LP oracle fell back to greedy.
    pub oracle_fallbacks: usize,
}

/// What the observer of [`reweight_with_observer`] sees each round.
#[derive(Debug)]
pub struct IterationView<'a> {
    pub t: usize,
    pub gains: &'a GainVector,
    pub response: &'a WeightVector,
}

/// Outcome of [`verify_feasibility`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Feasibility {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Edge { edge: usize, value: f64 },
    Degree { vertex: usize, value: f64 },
}

/// Checks `0 ≤ w ≤ 1` and weighted degrees `≤ 2pn`, each with `1e-9` slack.
pub fn verify_feasibility(g: &Graph, w: &WeightVector, p: f64) -> Result<Feasibility> {
    g.check_weights(w)?;
    let cap = 2.0 * p * g.n() as f64;
    let mut violations: Vec<Violation> = w
        .as_slice()
        .iter()
        .enumerate()
        .filter(|(_, &x)| !(-FEASIBILITY_TOL..=1.0 + FEASIBILITY_TOL).contains(&x))
        .map(|(edge, &value)| Violation::Edge { edge, value })
        .collect();
    for (vertex, &value) in degrees_from_slice(g, w.as_slice()).iter().enumerate() {
        if value > cap + FEASIBILITY_TOL {
            violations.push(Violation::Degree { vertex, value });
        }
    }
    Ok(Feasibility {
        ok: violations.is_empty(),
        violations,
    })
}

/// Runs MMWU and returns the averaged reweighting.
pub fn reweight(g: &Graph, params: &MmwuParams) -> Result<ReweightReport> {
    reweight_with_observer(g, params, |_| {})
}

pub fn reweight_with_observer<F>(g: &Graph, params: &MmwuParams, mut observe: F) -> Result<ReweightReport>
where
    F: FnMut(&IterationView<'_>),
{
    let start = Instant::now();
    let mut state = State::new(g, params)?;
    let exact = params.uses_exact();
    let mut per_iter_loss = Vec::with_capacity(params.iterations);
    let mut fallbacks = 0;
    for t in 0..params.iterations {
        let gains = if exact {
            edge_gains(g, &Embedding::new(state.exact_factor()?.a))?
        } else {
            state.sketched_gains(t)?
        };
        let (response, fell_back) = respond(g, &gains, params)?;
        fallbacks += fell_back as usize;
        per_iter_loss.push(gains.value(&response));
        observe(&IterationView {
            t,
            gains: &gains,
            response: &response,
        });
        state.play(&response);
    }
    let inv_t = 1.0 / params.iterations as f64;
    let w_out = WeightVector::new(state.cum.iter().map(|x| x * inv_t).collect())?;
    let lambda_gap = lambda_n_minus_1(&build_laplacian(g, &w_out)?)?;
    let feasible = verify_feasibility(g, &w_out, params.p)?.ok;
    Ok(ReweightReport {
        w_out,
        lambda_gap,
        feasible,
        per_iter_loss,
        wall_time: start.elapsed(),
        iterations: params.iterations,
        exact_density: exact,
        oracle_fallbacks: fallbacks,
    })
}

fn respond(g: &Graph, gains: &GainVector, params: &MmwuParams) -> Result<(WeightVector, bool)> {
    let b = params.budget();
    match params.oracle {
        OracleKind::Greedy => Ok((greedy_b_matching(g, gains, b)?, false)),
        OracleKind::Lp => match approx_packing_oracle(g, gains, b, params.eps) {
            Ok(w) => Ok((w, false)),
            Err(Error::PackingBudgetExceeded(_)) => Ok((greedy_b_matching(g, gains, b)?, true)),
            Err(e) => Err(e),
        },
    }
}

/// Normalized factor of the exact density matrix.
struct DensityFactor {
    /// `X = AAᵀ` with `⟨Π, X⟩ = 1` and `Aᵀ1 = 0`.
    a: DMatrix<f64>,
}

/// Columns whose scale falls below this (relative to the largest) are
/// dropped; their contribution to any gain is below `1e-40`.
const FACTOR_DROP: f64 = 1e-20;

/// Factor of `exp(−ηS)/⟨Π, exp(−ηS)⟩` restricted to the complement of the
/// ones vector. `S` must be a Laplacian.
fn density_factor(s: &DMatrix<f64>, eta: f64) -> Result<DensityFactor> {
    let n = s.nrows();
    // Lift the ones direction above the rest of the spectrum, then drop it.
    let lift = s.trace().abs() + 1.0;
    let (vals, q) = sorted_eigen(&s.add_scalar(lift / n as f64));
    let sigma = vals[0];
    let scales: Vec<f64> = vals[..n - 1].iter().map(|&l| (-0.5 * eta * (l - sigma)).exp()).collect();
    let keep: Vec<usize> = (0..n - 1).filter(|&c| scales[c] >= FACTOR_DROP).collect();
    let norm: f64 = keep.iter().map(|&c| scales[c] * scales[c]).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(invalid("degenerate density matrix"));
    }
    let a = DMatrix::from_fn(n, keep.len(), |r, c| q[(r, keep[c])] * scales[keep[c]] / norm);
    Ok(DensityFactor { a })
}

struct State<'a> {
    g: &'a Graph,
    params: &'a MmwuParams,
    cum: Vec<f64>,
    /// Dense cumulative Laplacian, kept only when the exact factor is used.
    dense: Option<DMatrix<f64>>,
}

impl<'a> State<'a> {
    fn new(g: &'a Graph, params: &'a MmwuParams) -> Result<Self> {
        params.validate()?;
        if g.n() != params.n {
            return Err(Error::DimensionMismatch {
                expected: params.n,
                actual: g.n(),
            });
        }
        Ok(Self {
            g,
            params,
            cum: vec![0.0; g.m()],
            dense: None,
        })
    }

    fn dense(&mut self) -> &DMatrix<f64> {
        let (g, cum) = (self.g, &self.cum);
        self.dense.get_or_insert_with(|| crate::graph::laplacian_from_slice(g, cum))
    }

    fn exact_factor(&mut self) -> Result<DensityFactor> {
        let eta = self.params.eta;
        density_factor(self.dense(), eta)
    }

    fn sketched_gains(&mut self, t: usize) -> Result<GainVector> {
        let (n, k) = (self.g.n(), self.params.k);
        let r = jl_matrix(n, k, derive_seed(self.params.seed, Domain::Sketch, &[t as u64]))?;
        let op = LaplacianOperator::from_slice(self.g, &self.cum);
        let probe: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let shift = smallest_ritz_value(&op, &probe, 40)?;
        let opts = ExpActionOptions {
            delta: self.params.exp_delta,
            shift,
            deflate_ones: true,
            max_dim: None,
        };
        let u = exp_action_operator(&op, 0.5 * self.params.eta, &r, &opts)?;
        edge_gains(self.g, &Embedding::normalized(u)?)
    }

    fn play(&mut self, w: &WeightVector) {
        for (e, &x) in w.as_slice().iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            self.cum[e] += x;
            if let Some(s) = self.dense.as_mut() {
                let (i, j) = self.g.edges()[e];
                s[(i, i)] += x;
                s[(j, j)] += x;
                s[(i, j)] -= x;
                s[(j, i)] -= x;
            }
        }
    }
}

/// One round of a regret audit.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretStep {
    /// `⟨L_t, X_t⟩` against the exact density matrix.
    pub loss: f64,
    /// `⟨L_t², X_t⟩`.
    pub quadratic: f64,
    /// Fraction of edges whose sketched gain is within `(1 ± 2ε)` of the
    /// exact gain; `None` when the oracle saw exact gains.
    pub jl_within: Option<f64>,
}

/// Both sides of the MMWU regret bound
/// `λ_{n-1}(Σ L_t) ≥ Σ⟨L_t, X_t⟩ − η Σ⟨L_t², X_t⟩ − ln(n)/η`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretLedger {
    pub steps: Vec<RegretStep>,
    pub eta: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs − rhs`; nonnegative whenever the bound holds.
    pub slack: f64,
}

/// Largest `n` accepted by [`regret_audit`].
pub const AUDIT_MAX_N: usize = 200;

/// Replays MMWU while forming every density matrix densely and evaluates
/// the regret bound for the losses actually played.
///
/// With `exact_updates` the oracle sees exact gains. Otherwise it sees the
/// gains of the configured sketch, and each step records how well they
/// match the exact ones.
pub fn regret_audit(g: &Graph, params: &MmwuParams, exact_updates: bool) -> Result<RegretLedger> {
    if g.n() > AUDIT_MAX_N {
        return Err(Error::InstanceTooLarge(format!(
            "regret audit forms dense density matrices; n = {} exceeds {AUDIT_MAX_N}",
            g.n()
        )));
    }
    let mut state = State::new(g, params)?;
    let eps = params.eps;
    let mut steps = Vec::with_capacity(params.iterations);
    for t in 0..params.iterations {
        let factor = state.exact_factor()?;
        let exact = edge_gains(g, &Embedding::new(factor.a.clone()))?;
        let (seen, jl_within) = if exact_updates || params.uses_exact() {
            (exact.clone(), None)
        } else {
            let sk = state.sketched_gains(t)?;
            let within = sk
                .as_slice()
                .iter()
                .zip(exact.as_slice())
                .filter(|(s, c)| (*s - *c).abs() <= 2.0 * eps * *c)
                .count();
            (sk, Some(within as f64 / g.m().max(1) as f64))
        };
        let (response, _) = respond(g, &seen, params)?;
        let loss = exact.value(&response);
        // ⟨L², AAᵀ⟩ = ‖LA‖_F².
        let mut la = DMatrix::<f64>::zeros(g.n(), factor.a.ncols());
        for (e, &x) in response.as_slice().iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let (i, j) = g.edges()[e];
            let diff = (factor.a.row(i) - factor.a.row(j)) * x;
            let mut ri = la.row_mut(i);
            ri += &diff;
            let mut rj = la.row_mut(j);
            rj -= &diff;
        }
        steps.push(RegretStep {
            loss,
            quadratic: la.norm_squared(),
            jl_within,
        });
        state.play(&response);
    }
    let eta = params.eta;
    let lhs = lambda_n_minus_1(state.dense())?;
    let rhs = steps.iter().map(|s| s.loss).sum::<f64>()
        - eta * steps.iter().map(|s| s.quadratic).sum::<f64>()
        - (g.n() as f64).ln() / eta;
    Ok(RegretLedger {
        steps,
        eta,
        lhs,
        rhs,
        slack: lhs - rhs,
    })
}
