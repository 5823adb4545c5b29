//! Random graph models, the monotone adversaries and BTL comparison sampling.

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::graph::Graph;
use crate::rng::{stream, Domain};

/// Latent BTL scores together with the top-K parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BtlInstance {
    theta_star: Vec<f64>,
    k_top: usize,
    delta_k: f64,
}

impl BtlInstance {
    /// Centers `theta` and checks that the K-th and (K+1)-th largest scores
    /// are separated.
    pub fn new(theta: Vec<f64>, k_top: usize) -> Result<Self> {
        let n = theta.len();
        if n < 2 || k_top == 0 || k_top >= n {
            return Err(invalid(format!("K must satisfy 1 <= K < n, got K={k_top}, n={n}")));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(invalid("scores must be finite"));
        }
        let mean = theta.iter().sum::<f64>() / n as f64;
        let theta_star: Vec<f64> = theta.iter().map(|t| t - mean).collect();
        let mut sorted = theta_star.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let delta_k = sorted[k_top - 1] - sorted[k_top];
        if delta_k <= 0.0 {
            return Err(invalid(format!("score gap at K={k_top} is {delta_k}, must be > 0")));
        }
        Ok(Self {
            theta_star,
            k_top,
            delta_k,
        })
    }

    pub fn theta_star(&self) -> &[f64] {
        &self.theta_star
    }

    pub fn n(&self) -> usize {
        self.theta_star.len()
    }

    pub fn k_top(&self) -> usize {
        self.k_top
    }

    pub fn delta_k(&self) -> f64 {
        self.delta_k
    }

    /// `exp(max θ* − min θ*)`.
    pub fn kappa(&self) -> f64 {
        let max = self.theta_star.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = self.theta_star.iter().copied().fold(f64::INFINITY, f64::min);
        (max - min).exp()
    }

    /// Indices of the true top-K items, in increasing order.
    pub fn top_set(&self) -> Vec<usize> {
        crate::mle::top_k(&self.theta_star, self.k_top)
    }
}

/// Averaged comparison outcomes, one entry per edge of the associated graph.
///
/// For edge `(j, i)` stored with `j < i`, `y(e)` is the fraction of the `L`
/// comparisons won by the lower-indexed item `j`. The likelihood uses the
/// complementary rate `1 − y(e)`, the fraction won by `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonData {
    y: Vec<f64>,
    reps: usize,
}

impl ComparisonData {
    /// Win counts of the lower-indexed endpoint out of `reps` comparisons.
    pub fn from_counts(counts: &[u64], reps: usize) -> Result<Self> {
        if reps == 0 {
            return Err(invalid("repetition count L must be >= 1"));
        }
        let mut y = Vec::with_capacity(counts.len());
        for (e, &c) in counts.iter().enumerate() {
            if c > reps as u64 {
                return Err(invalid(format!("edge {e}: {c} wins out of {reps} comparisons")));
            }
            y.push(c as f64 / reps as f64);
        }
        Ok(Self { y, reps })
    }

    /// Rates must lie on the grid `{0, 1/L, ..., 1}` up to 1e-9.
    pub fn from_rates(y: Vec<f64>, reps: usize) -> Result<Self> {
        if reps == 0 {
            return Err(invalid("repetition count L must be >= 1"));
        }
        let l = reps as f64;
        let mut counts = Vec::with_capacity(y.len());
        for (e, &v) in y.iter().enumerate() {
            let c = (v * l).round();
            if !(0.0..=1.0).contains(&v) || (v * l - c).abs() > 1e-9 * l.max(1.0) {
                return Err(invalid(format!("edge {e}: rate {v} is not a multiple of 1/{reps} in [0,1]")));
            }
            counts.push(c as u64);
        }
        Self::from_counts(&counts, reps)
    }

    /// The infinite-sample limit: every rate equals its comparison
    /// probability exactly. `reps()` reports 0 for such data.
    pub fn noiseless(g: &Graph, b: &BtlInstance) -> Result<Self> {
        check_scores(g, b)?;
        let t = b.theta_star();
        let y = g.edges().iter().map(|&(lo, hi)| lower_wins_prob(t[hi] - t[lo])).collect();
        Ok(Self { y, reps: 0 })
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn reps(&self) -> usize {
        self.reps
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub(crate) fn check_graph(&self, g: &Graph) -> Result<()> {
        if self.y.len() != g.m() {
            return Err(Error::DimensionMismatch {
                expected: g.m(),
                actual: self.y.len(),
            });
        }
        Ok(())
    }
}

/// Probability that the lower-indexed item `j` beats `i`, given `θ_i − θ_j`.
fn lower_wins_prob(diff: f64) -> f64 {
    crate::mle::sigmoid(-diff)
}

fn check_scores(g: &Graph, b: &BtlInstance) -> Result<()> {
    if b.n() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            actual: b.n(),
        });
    }
    Ok(())
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid(format!("{name} must lie in (0, 1], got {p}")));
    }
    Ok(())
}

/// Erdős–Rényi graph `G(n, p)`; every edge is flagged as an ER edge.
pub fn gen_er(n: usize, p: f64, seed: u64) -> Result<Graph> {
    check_prob("p", p)?;
    if n < 2 {
        return Err(invalid(format!("graph needs at least 2 vertices, got {n}")));
    }
    let mut rng = stream(seed, Domain::ErGraph, &[n as u64]);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen::<f64>() < p {
                edges.push((i, j, true));
            }
        }
    }
    Graph::with_er_mask(n, edges)
}

/// Plants two cliques: one on a random `⌊n/3⌋`-subset of the first `n/2`
/// vertices, one on a random `⌊n/3⌋`-subset of the last `n/2`. Existing
/// edges keep their flags; planted edges are flagged as non-ER. `n` must be
/// even.
pub fn apply_clique_adversary(g: &Graph, seed: u64) -> Result<Graph> {
    let n = g.n();
    if n % 2 != 0 {
        return Err(invalid(format!("clique adversary needs an even n, got {n}")));
    }
    let mask = g
        .er_mask()
        .ok_or_else(|| invalid("clique adversary needs a graph with ER flags"))?;
    let mut rng = stream(seed, Domain::Adversary, &[n as u64]);
    let half = n / 2;
    let third = n / 3;
    let mut a: Vec<usize> = sample(&mut rng, half, third).into_vec();
    let mut b: Vec<usize> = sample(&mut rng, half, third).into_iter().map(|v| v + half).collect();
    a.sort_unstable();
    b.sort_unstable();

    let mut edges: Vec<(usize, usize, bool)> = g
        .edges()
        .iter()
        .zip(mask)
        .map(|(&(i, j), &er)| (i, j, er))
        .collect();
    for set in [&a, &b] {
        for (x, &u) in set.iter().enumerate() {
            for &v in &set[x + 1..] {
                if g.edge_index(u, v).is_none() {
                    edges.push((u, v, false));
                }
            }
        }
    }
    Graph::with_er_mask(n, edges)
}

/// Cluster sampling: pairs inside cluster `t` are joined with probability
/// `p_within[t]`, all other pairs with probability `q`.
///
/// One uniform draw per pair decides both the edge and its ER flag
/// (`δ ≤ q`), so the flagged subgraph is exactly `G(n, q)`.
pub fn gen_cluster_graph(sizes: &[usize], p_within: &[f64], q: f64, seed: u64) -> Result<Graph> {
    if sizes.is_empty() || sizes.len() != p_within.len() {
        return Err(invalid("cluster sizes and within-cluster probabilities must be non-empty and of equal length"));
    }
    if sizes.iter().any(|&s| s == 0) {
        return Err(invalid("cluster sizes must be positive"));
    }
    check_prob("q", q)?;
    for &p in p_within {
        check_prob("p_within", p)?;
        if q > p {
            return Err(invalid(format!("q = {q} exceeds within-cluster probability {p}")));
        }
    }
    let label: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(t, &s)| std::iter::repeat(t).take(s))
        .collect();
    let n = label.len();
    if n < 2 {
        return Err(invalid("cluster graph needs at least 2 vertices"));
    }
    let mut rng = stream(seed, Domain::Cluster, &[n as u64]);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let delta: f64 = rng.gen();
            let threshold = if label[i] == label[j] { p_within[label[i]] } else { q };
            if delta < threshold {
                edges.push((i, j, delta < q));
            }
        }
    }
    Graph::with_er_mask(n, edges)
}

/// Two-level scores: `Δ` on the first K items, 0 on the rest, then centered.
pub fn gen_btl_scores(n: usize, k: usize, delta_k: f64) -> Result<BtlInstance> {
    if !(delta_k > 0.0) || !delta_k.is_finite() {
        return Err(invalid(format!("score gap must be positive, got {delta_k}")));
    }
    if k == 0 || k >= n {
        return Err(invalid(format!("K must satisfy 1 <= K < n, got K={k}, n={n}")));
    }
    let theta = (0..n).map(|i| if i < k { delta_k } else { 0.0 }).collect();
    BtlInstance::new(theta, k)
}

/// Draws `L` comparisons per edge. Edge `e` uses its own substream keyed by
/// `(seed, e)`, so results do not depend on iteration order.
pub fn sample_comparisons(g: &Graph, b: &BtlInstance, reps: usize, seed: u64) -> Result<ComparisonData> {
    check_scores(g, b)?;
    if reps == 0 {
        return Err(invalid("repetition count L must be >= 1"));
    }
    let t = b.theta_star();
    let counts: Vec<u64> = g
        .edges()
        .iter()
        .enumerate()
        .map(|(e, &(lo, hi))| {
            let p = lower_wins_prob(t[hi] - t[lo]);
            let mut rng = stream(seed, Domain::Comparisons, &[e as u64]);
            (0..reps).filter(|_| rng.gen::<f64>() < p).count() as u64
        })
        .collect();
    ComparisonData::from_counts(&counts, reps)
}
