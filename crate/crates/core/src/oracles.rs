//! Best-response oracles for the MMWU saddle point.
//!
//! Given the current density-matrix candidate `X = VVᵀ`, the reweighting
//! player maximizes `Σ c_e w_e` over the fractional b-matching polytope
//! `F_b = {0 ≤ w ≤ 1, Σ_{e∋i} w_e ≤ b}`, where `c_e = ‖v_i − v_j‖²`.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::error::{invalid, Error, Result};
use crate::graph::{Graph, WeightVector};
use crate::spectral::Embedding;

/// Nonnegative per-edge gains `c_e = ⟨L_e, X⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainVector(Vec<f64>);

impl GainVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(e) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid(format!("gain {} at edge {e} must be finite and >= 0", values[e])));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `Σ c_e w_e`.
    pub fn value(&self, w: &WeightVector) -> f64 {
        self.0.iter().zip(w.as_slice()).map(|(c, w)| c * w).sum()
    }

    fn check(&self, g: &Graph) -> Result<()> {
        if self.0.len() != g.m() {
            return Err(Error::DimensionMismatch {
                expected: g.m(),
                actual: self.0.len(),
            });
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for GainVector {
    type Output = f64;
    fn index(&self, e: usize) -> &f64 {
        &self.0[e]
    }
}

/// Dual solution `(s, ℓ)` of the fractional b-matching LP.
#[derive(Debug, Clone, PartialEq)]
pub struct DualCertificate {
    pub s: Vec<f64>,
    pub ell: Vec<f64>,
    /// `b·Σs + Σℓ`, an upper bound on the LP optimum.
    pub value: f64,
}

/// Squared distances between embedding rows joined by an edge.
pub fn edge_gains(g: &Graph, emb: &Embedding) -> Result<GainVector> {
    let v = emb.matrix();
    if v.nrows() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            actual: v.nrows(),
        });
    }
    // Columns of the transpose are the embedding rows, stored contiguously.
    let rows = v.transpose();
    let c = g
        .edges()
        .iter()
        .map(|&(i, j)| sq_dist(rows.column(i).as_slice(), rows.column(j).as_slice()))
        .collect();
    GainVector::new(c)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| (x - y) * (x - y)).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            let d = x[l] - y[l];
            acc[l] += d * d;
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn check_budget(b: usize) -> Result<()> {
    if b == 0 {
        return Err(invalid("degree budget b must be >= 1"));
    }
    Ok(())
}

/// Edge order used by the greedy oracle: gain descending, then index.
fn greedy_order(c: &GainVector) -> Vec<usize> {
    let mut order: Vec<usize> = (0..c.len()).collect();
    order.sort_by(|&a, &b| c[b].total_cmp(&c[a]).then(a.cmp(&b)));
    order
}

/// Greedy maximal b-matching: scan edges by decreasing gain and keep an edge
/// while both endpoints have fewer than `b` kept edges.
pub fn greedy_b_matching(g: &Graph, c: &GainVector, b: usize) -> Result<WeightVector> {
    c.check(g)?;
    check_budget(b)?;
    let mut deg = vec![0usize; g.n()];
    let mut w = vec![0.0; g.m()];
    for e in greedy_order(c) {
        if c[e] <= 0.0 {
            break;
        }
        let (i, j) = g.edges()[e];
        if deg[i] < b && deg[j] < b {
            deg[i] += 1;
            deg[j] += 1;
            w[e] = 1.0;
        }
    }
    WeightVector::new(w)
}

/// Dual fitting for a greedy matching: `s_i` is the gain of the last edge
/// kept at a saturated vertex (0 otherwise) and
/// `ℓ_e = max(c_e − s_i − s_j, 0)` on kept edges.
pub fn greedy_dual_certificate(g: &Graph, c: &GainVector, b: usize, matching: &WeightVector) -> Result<DualCertificate> {
    c.check(g)?;
    check_budget(b)?;
    g.check_weights(matching)?;
    let n = g.n();
    let mut deg = vec![0usize; n];
    let mut last = vec![f64::INFINITY; n];
    for (e, &(i, j)) in g.edges().iter().enumerate() {
        match matching[e] {
            x if x == 1.0 => {
                for v in [i, j] {
                    deg[v] += 1;
                    last[v] = last[v].min(c[e]);
                }
            }
            x if x == 0.0 => {}
            x => return Err(invalid(format!("matching has non-integral entry {x} at edge {e}"))),
        }
    }
    if let Some(v) = deg.iter().position(|&d| d > b) {
        return Err(invalid(format!("matching exceeds budget {b} at vertex {v}")));
    }
    let s: Vec<f64> = (0..n).map(|v| if deg[v] == b { last[v] } else { 0.0 }).collect();
    let ell: Vec<f64> = g
        .edges()
        .iter()
        .enumerate()
        .map(|(e, &(i, j))| {
            if matching[e] == 1.0 {
                (c[e] - s[i] - s[j]).max(0.0)
            } else {
                0.0
            }
        })
        .collect();
    for (e, &(i, j)) in g.edges().iter().enumerate() {
        if s[i] + s[j] + ell[e] < c[e] - 1e-9 {
            return Err(invalid(format!(
                "dual infeasible at edge {e} ({i}, {j}): {} + {} + {} < {}",
                s[i], s[j], ell[e], c[e]
            )));
        }
    }
    let value = b as f64 * s.iter().sum::<f64>() + ell.iter().sum::<f64>();
    Ok(DualCertificate { s, ell, value })
}

/// Largest edge count accepted by [`exact_lp_oracle_small`].
pub const EXACT_LP_MAX_EDGES: usize = 20;

/// Exact optimum of the fractional b-matching LP by branch and bound over
/// half-integral points, which include every vertex of the polytope.
pub fn exact_lp_oracle_small(g: &Graph, c: &GainVector, b: usize) -> Result<(f64, WeightVector)> {
    c.check(g)?;
    check_budget(b)?;
    if g.m() > EXACT_LP_MAX_EDGES {
        return Err(Error::InstanceTooLarge(format!(
            "exact LP oracle handles at most {EXACT_LP_MAX_EDGES} edges, got {}",
            g.m()
        )));
    }
    let order: Vec<usize> = greedy_order(c).into_iter().filter(|&e| c[e] > 0.0).collect();
    let mut suffix = vec![0.0; order.len() + 1];
    for k in (0..order.len()).rev() {
        suffix[k] = suffix[k + 1] + c[order[k]];
    }
    let mut search = HalfSearch {
        g,
        c,
        order: &order,
        suffix: &suffix,
        cap: vec![2 * b; g.n()],
        cur: vec![0u8; g.m()],
        best: vec![0u8; g.m()],
        best_value: 0.0,
    };
    search.run(0, 0.0);
    let w = search.best.iter().map(|&h| h as f64 / 2.0).collect();
    Ok((search.best_value, WeightVector::new(w)?))
}

struct HalfSearch<'a> {
    g: &'a Graph,
    c: &'a GainVector,
    order: &'a [usize],
    suffix: &'a [f64],
    /// Remaining degree capacity in half units.
    cap: Vec<usize>,
    /// Current point in half units (`2w`).
    cur: Vec<u8>,
    best: Vec<u8>,
    best_value: f64,
}

impl HalfSearch<'_> {
    fn run(&mut self, k: usize, value: f64) {
        if value > self.best_value {
            self.best_value = value;
            self.best.copy_from_slice(&self.cur);
        }
        if k == self.order.len() || value + self.suffix[k] <= self.best_value {
            return;
        }
        let e = self.order[k];
        let (i, j) = self.g.edges()[e];
        let room = self.cap[i].min(self.cap[j]).min(2);
        for h in (0..=room).rev() {
            self.cap[i] -= h;
            self.cap[j] -= h;
            self.cur[e] = h as u8;
            self.run(k + 1, value + self.c[e] * h as f64 / 2.0);
            self.cur[e] = 0;
            self.cap[i] += h;
            self.cap[j] += h;
        }
    }
}

/// An optimal point of the fractional b-matching LP, which in particular is
/// within a factor `1 − eps` of optimal for every `eps ∈ (0, ½]`.
///
/// Solved as a min-cost flow on the bipartite double cover, whose optimum is
/// twice the LP optimum and whose integral flows map to half-integral `w`.
pub fn approx_packing_oracle(g: &Graph, c: &GainVector, b: usize, eps: f64) -> Result<WeightVector> {
    approx_packing_oracle_with_budget(g, c, b, eps, 2 * g.m() + 1)
}

/// As [`approx_packing_oracle`], failing with
/// [`Error::PackingBudgetExceeded`] after `budget` augmenting paths.
pub fn approx_packing_oracle_with_budget(
    g: &Graph,
    c: &GainVector,
    b: usize,
    eps: f64,
    budget: usize,
) -> Result<WeightVector> {
    c.check(g)?;
    check_budget(b)?;
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(invalid(format!("eps must lie in (0, 1/2], got {eps}")));
    }
    let n = g.n();
    let (src, sink) = (0, 2 * n + 1);
    let mut net = FlowNet::new(2 * n + 2);
    for i in 0..n {
        net.add(src, 1 + i, b as i64, 0.0);
        net.add(1 + n + i, sink, b as i64, 0.0);
    }
    let mut arcs = Vec::new();
    for (e, &(i, j)) in g.edges().iter().enumerate() {
        if c[e] > 0.0 {
            let a = net.add(1 + i, 1 + n + j, 1, -c[e]);
            let b2 = net.add(1 + j, 1 + n + i, 1, -c[e]);
            arcs.push((e, a, b2));
        }
    }
    net.min_cost_flow(src, sink, budget)?;
    let mut w = vec![0.0; g.m()];
    for (e, a, b2) in arcs {
        w[e] = (net.flow(a) + net.flow(b2)) as f64 / 2.0;
    }
    WeightVector::new(w)
}

struct Arc {
    to: usize,
    cap: i64,
    cost: f64,
    rev: usize,
}

struct FlowNet {
    adj: Vec<Vec<Arc>>,
    handles: Vec<(usize, usize, i64)>,
}

impl FlowNet {
    fn new(nodes: usize) -> Self {
        Self {
            adj: (0..nodes).map(|_| Vec::new()).collect(),
            handles: Vec::new(),
        }
    }

    fn add(&mut self, u: usize, v: usize, cap: i64, cost: f64) -> usize {
        let (ru, rv) = (self.adj[v].len(), self.adj[u].len());
        self.adj[u].push(Arc { to: v, cap, cost, rev: ru });
        self.adj[v].push(Arc {
            to: u,
            cap: 0,
            cost: -cost,
            rev: rv,
        });
        self.handles.push((u, rv, cap));
        self.handles.len() - 1
    }

    fn flow(&self, h: usize) -> i64 {
        let (u, idx, cap) = self.handles[h];
        cap - self.adj[u][idx].cap
    }

    /// Successive shortest paths, stopping once no path has negative cost.
    /// Initial potentials come from the layered structure source → left →
    /// right → sink, which has no residual cycles.
    fn min_cost_flow(&mut self, s: usize, t: usize, budget: usize) -> Result<()> {
        let nodes = self.adj.len();
        let mut pot = vec![0.0f64; nodes];
        for _ in 0..3 {
            for u in 0..nodes {
                for a in &self.adj[u] {
                    if a.cap > 0 && pot[u] + a.cost < pot[a.to] {
                        pot[a.to] = pot[u] + a.cost;
                    }
                }
            }
        }
        let mut augmentations = 0;
        loop {
            let mut dist = vec![f64::INFINITY; nodes];
            let mut prev: Vec<Option<(usize, usize)>> = vec![None; nodes];
            let mut heap = BinaryHeap::new();
            dist[s] = 0.0;
            heap.push(Reverse(Key(0.0, s)));
            while let Some(Reverse(Key(d, u))) = heap.pop() {
                if d > dist[u] {
                    continue;
                }
                for (k, a) in self.adj[u].iter().enumerate() {
                    if a.cap <= 0 {
                        continue;
                    }
                    let rc = (a.cost + pot[u] - pot[a.to]).max(0.0);
                    if d + rc < dist[a.to] {
                        dist[a.to] = d + rc;
                        prev[a.to] = Some((u, k));
                        heap.push(Reverse(Key(d + rc, a.to)));
                    }
                }
            }
            if dist[t].is_infinite() {
                return Ok(());
            }
            for v in 0..nodes {
                if dist[v].is_finite() {
                    pot[v] += dist[v];
                }
            }
            let path_cost = pot[t] - pot[s];
            if path_cost >= -1e-12 {
                return Ok(());
            }
            if augmentations == budget {
                return Err(Error::PackingBudgetExceeded(budget));
            }
            let mut push = i64::MAX;
            let mut v = t;
            while let Some((u, k)) = prev[v] {
                push = push.min(self.adj[u][k].cap);
                v = u;
            }
            let mut v = t;
            while let Some((u, k)) = prev[v] {
                self.adj[u][k].cap -= push;
                let (to, rev) = (self.adj[u][k].to, self.adj[u][k].rev);
                self.adj[to][rev].cap += push;
                v = u;
            }
            augmentations += 1;
        }
    }
}

#[derive(PartialEq)]
struct Key(f64, usize);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}
