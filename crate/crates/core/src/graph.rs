//! Undirected comparison graphs, edge weightings and weighted Laplacians.
//!
//! Edges are stored canonically as `(lo, hi)` pairs with `lo < hi`, sorted
//! lexicographically. An edge's index is its position in that list, and every
//! per-edge vector in the crate ([`WeightVector`], gains, comparison data) is
//! indexed the same way.

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};

/// Weights at or below this value are treated as absent when testing
/// connectivity.
pub const DEFAULT_CONNECTIVITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    er_mask: Option<Vec<bool>>,
}

impl Graph {
    /// Builds a graph from arbitrary unordered pairs. Duplicates collapse.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let tagged = edges.into_iter().map(|(i, j)| (i, j, true));
        let mut g = Self::build(n, tagged)?;
        g.er_mask = None;
        Ok(g)
    }

    /// Builds a graph whose edges carry the hidden-ER membership flag.
    /// A pair listed more than once is flagged if any listing is flagged.
    pub fn with_er_mask(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize, bool)>,
    ) -> Result<Self> {
        Self::build(n, edges)
    }

    fn build(n: usize, edges: impl IntoIterator<Item = (usize, usize, bool)>) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("graph needs at least 2 vertices, got {n}")));
        }
        let mut tagged = Vec::new();
        for (i, j, er) in edges {
            if i == j {
                return Err(Error::SelfLoop(i, j));
            }
            for v in [i, j] {
                if v >= n {
                    return Err(Error::VertexOutOfRange { vertex: v, n });
                }
            }
            tagged.push((i.min(j), i.max(j), er));
        }
        tagged.sort_unstable();
        let mut edges: Vec<(usize, usize)> = Vec::with_capacity(tagged.len());
        let mut mask: Vec<bool> = Vec::with_capacity(tagged.len());
        for (lo, hi, er) in tagged {
            if edges.last() == Some(&(lo, hi)) {
                let last = mask.last_mut().expect("mask tracks edges");
                *last |= er;
            } else {
                edges.push((lo, hi));
                mask.push(er);
            }
        }
        Ok(Self {
            n,
            edges,
            er_mask: Some(mask),
        })
    }

    pub fn complete(n: usize) -> Result<Self> {
        Self::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
    }

    pub fn path(n: usize) -> Result<Self> {
        Self::new(n, (1..n).map(|i| (i - 1, i)))
    }

    pub fn star(n: usize) -> Result<Self> {
        Self::new(n, (1..n).map(|i| (0, i)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn er_mask(&self) -> Option<&[bool]> {
        self.er_mask.as_deref()
    }

    /// Replaces (or drops) the ER membership flags.
    pub fn set_er_mask(&mut self, mask: Option<Vec<bool>>) -> Result<()> {
        if let Some(m) = &mask {
            if m.len() != self.edges.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.edges.len(),
                    actual: m.len(),
                });
            }
        }
        self.er_mask = mask;
        Ok(())
    }

    /// Index of the edge `{i, j}` if present.
    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        let key = (i.min(j), i.max(j));
        self.edges.binary_search(&key).ok()
    }

    /// Indicator weighting of the hidden ER subgraph, if the mask is known.
    pub fn er_indicator(&self) -> Option<WeightVector> {
        self.er_mask.as_ref().map(|m| {
            WeightVector(m.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
        })
    }

    /// The subgraph of ER-flagged edges (all vertices kept).
    pub fn er_subgraph(&self) -> Option<Graph> {
        let mask = self.er_mask.as_ref()?;
        let edges = self
            .edges
            .iter()
            .zip(mask)
            .filter(|(_, &b)| b)
            .map(|(&(i, j), _)| (i, j, true));
        Graph::with_er_mask(self.n, edges).ok()
    }

    /// Per-vertex incident edge lists `(neighbor, edge index)`.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.n];
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            adj[i].push((j, e));
            adj[j].push((i, e));
        }
        adj
    }

    pub(crate) fn check_weights(&self, w: &WeightVector) -> Result<()> {
        if w.len() != self.m() {
            return Err(Error::DimensionMismatch {
                expected: self.m(),
                actual: w.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_vertex(&self, v: usize) -> Result<()> {
        if v >= self.n {
            return Err(Error::VertexOutOfRange {
                vertex: v,
                n: self.n,
            });
        }
        Ok(())
    }
}

/// Nonnegative, finite weights indexed by the edges of a [`Graph`].
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((e, w)) = values
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
        {
            return Err(invalid(format!("weight {w} on edge {e} is not a finite nonnegative number")));
        }
        Ok(Self(values))
    }

    pub fn ones(m: usize) -> Self {
        Self(vec![1.0; m])
    }

    pub fn zeros(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// `w_max`; zero for an empty weighting.
    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Entrywise scaling by a nonnegative factor.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|w| w * c).collect())
    }
}

impl std::ops::Index<usize> for WeightVector {
    type Output = f64;
    fn index(&self, e: usize) -> &f64 {
        &self.0[e]
    }
}

/// Dense weighted Laplacian `L_w = Σ w_ij (e_i − e_j)(e_i − e_j)ᵀ`.
pub fn build_laplacian(g: &Graph, w: &WeightVector) -> Result<DMatrix<f64>> {
    g.check_weights(w)?;
    Ok(laplacian_from_slice(g, w.as_slice()))
}

pub(crate) fn laplacian_from_slice(g: &Graph, w: &[f64]) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(g.n(), g.n());
    for (&(i, j), &wij) in g.edges().iter().zip(w) {
        l[(i, i)] += wij;
        l[(j, j)] += wij;
        l[(i, j)] -= wij;
        l[(j, i)] -= wij;
    }
    l
}

/// Weighted degree of every vertex. `d_max`/`d_min` are its extremes.
pub fn weighted_degrees(g: &Graph, w: &WeightVector) -> Result<Vec<f64>> {
    g.check_weights(w)?;
    Ok(degrees_from_slice(g, w.as_slice()))
}

pub(crate) fn degrees_from_slice(g: &Graph, w: &[f64]) -> Vec<f64> {
    let mut d = vec![0.0; g.n()];
    for (&(i, j), &wij) in g.edges().iter().zip(w) {
        d[i] += wij;
        d[j] += wij;
    }
    d
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Component label of each vertex over edges with weight `> tol`.
/// Labels are the smallest vertex of each component.
pub fn components(g: &Graph, w: &WeightVector, tol: f64) -> Vec<usize> {
    let mut uf = UnionFind::new(g.n());
    for (&(i, j), &wij) in g.edges().iter().zip(w.as_slice()) {
        if wij > tol {
            uf.union(i, j);
        }
    }
    (0..g.n()).map(|v| uf.find(v)).collect()
}

/// True iff the edges with weight `> tol` connect all vertices.
///
/// `w` must have one entry per edge of `g`; a length mismatch reports `false`.
pub fn is_connected(g: &Graph, w: &WeightVector, tol: f64) -> bool {
    if w.len() != g.m() {
        return false;
    }
    components(g, w, tol).iter().all(|&c| c == 0)
}

/// Returns `Error::Disconnected` naming the first component that does not
/// contain vertex 0.
pub fn require_connected(g: &Graph, w: &WeightVector, tol: f64) -> Result<()> {
    g.check_weights(w)?;
    let labels = components(g, w, tol);
    if labels.iter().all(|&c| c == 0) {
        return Ok(());
    }
    let mut roots: Vec<usize> = labels.clone();
    roots.sort_unstable();
    roots.dedup();
    let other = roots[1];
    let component = (0..g.n()).filter(|&v| labels[v] == other).collect();
    Err(Error::Disconnected {
        components: roots.len(),
        component,
    })
}

/// `vol(S) = Σ_{i∈S} Σ_{j≠i} w_ij`.
pub fn volume(g: &Graph, w: &WeightVector, s: &[usize]) -> Result<f64> {
    g.check_weights(w)?;
    for &v in s {
        g.check_vertex(v)?;
    }
    let d = degrees_from_slice(g, w.as_slice());
    Ok(s.iter().map(|&v| d[v]).sum())
}

/// Matrix-free weighted Laplacian in compressed adjacency form.
#[derive(Debug, Clone)]
pub struct LaplacianOperator {
    n: usize,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    weights: Vec<f64>,
    degrees: Vec<f64>,
}

impl LaplacianOperator {
    pub fn new(g: &Graph, w: &WeightVector) -> Result<Self> {
        g.check_weights(w)?;
        Ok(Self::from_slice(g, w.as_slice()))
    }

    pub(crate) fn from_slice(g: &Graph, w: &[f64]) -> Self {
        let n = g.n();
        let mut counts = vec![0usize; n + 1];
        for (&(i, j), &wij) in g.edges().iter().zip(w) {
            if wij != 0.0 {
                counts[i + 1] += 1;
                counts[j + 1] += 1;
            }
        }
        for v in 0..n {
            counts[v + 1] += counts[v];
        }
        let offsets = counts.clone();
        let mut cursor = counts;
        let nnz = offsets[n];
        let mut neighbors = vec![0; nnz];
        let mut weights = vec![0.0; nnz];
        let mut degrees = vec![0.0; n];
        for (&(i, j), &wij) in g.edges().iter().zip(w) {
            if wij == 0.0 {
                continue;
            }
            for (a, b) in [(i, j), (j, i)] {
                neighbors[cursor[a]] = b;
                weights[cursor[a]] = wij;
                cursor[a] += 1;
                degrees[a] += wij;
            }
        }
        Self {
            n,
            offsets,
            neighbors,
            weights,
            degrees,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// `y = L x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for v in 0..self.n {
            let mut acc = self.degrees[v] * x[v];
            for k in self.offsets[v]..self.offsets[v + 1] {
                acc -= self.weights[k] * x[self.neighbors[k]];
            }
            y[v] = acc;
        }
    }

    /// Gershgorin bound on the largest eigenvalue: `2·d_max`.
    pub fn norm_bound(&self) -> f64 {
        2.0 * self.degrees.iter().copied().fold(0.0, f64::max)
    }
}
