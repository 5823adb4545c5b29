//! Reference implementations used as test oracles. They share no code with
//! the library beyond the graph container.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use semirank::{Graph, WeightVector};

pub fn dense_laplacian(n: usize, edges: &[(usize, usize)], w: &[f64]) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(n, n);
    for (&(i, j), &x) in edges.iter().zip(w) {
        l[(i, i)] += x;
        l[(j, j)] += x;
        l[(i, j)] -= x;
        l[(j, i)] -= x;
    }
    l
}

/// Ascending eigenvalues and matching eigenvectors (nalgebra QR iteration).
pub fn eig(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let e = SymmetricEigen::new(a.clone());
    let n = a.nrows();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&x, &y| e.eigenvalues[x].total_cmp(&e.eigenvalues[y]));
    let vals = idx.iter().map(|&i| e.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| e.eigenvectors[(r, idx[c])]);
    (vals, vecs)
}

/// Second-smallest eigenvalue.
pub fn gap(a: &DMatrix<f64>) -> f64 {
    eig(a).0[1]
}

/// `f(A)` for symmetric `A` through its eigendecomposition.
pub fn matrix_fn(a: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let (vals, q) = eig(a);
    let mut d = q.clone();
    for (c, &v) in vals.iter().enumerate() {
        d.column_mut(c).scale_mut(f(v));
    }
    d * q.transpose()
}

/// Pseudo-inverse of a connected Laplacian: invert `L + 11ᵀ/n`, then
/// subtract the ones part back out.
pub fn laplacian_pinv(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let j = DMatrix::from_element(n, n, 1.0 / n as f64);
    (l + &j).try_inverse().expect("connected Laplacian") - j
}

/// Minimum over all nontrivial cuts of `cut / min(vol S, vol S̄)`.
pub fn exhaustive_conductance(n: usize, edges: &[(usize, usize)], w: &[f64]) -> f64 {
    let mut deg = vec![0.0; n];
    for (&(i, j), &x) in edges.iter().zip(w) {
        deg[i] += x;
        deg[j] += x;
    }
    let total: f64 = deg.iter().sum();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << n) - 1 {
        let inside = |v: usize| mask >> v & 1 == 1;
        let vol_s: f64 = (0..n).filter(|&v| inside(v)).map(|v| deg[v]).sum();
        let cut: f64 = edges
            .iter()
            .zip(w)
            .filter(|(&(i, j), _)| inside(i) != inside(j))
            .map(|(_, &x)| x)
            .sum();
        best = best.min(cut / vol_s.min(total - vol_s));
    }
    best
}

pub fn connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &(i, j) in edges {
            for (a, b) in [(i, j), (j, i)] {
                if a == v && !seen[b] {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
    }
    seen.iter().all(|&s| s)
}

/// A graph on `lo..=hi` vertices with each pair present independently.
pub fn arb_graph(lo: usize, hi: usize) -> impl Strategy<Value = Graph> {
    (lo..=hi).prop_flat_map(|n| {
        let pairs = n * (n - 1) / 2;
        proptest::collection::vec(any::<bool>(), pairs).prop_map(move |mask| {
            let mut edges = Vec::new();
            let mut k = 0;
            for i in 0..n {
                for j in i + 1..n {
                    if mask[k] {
                        edges.push((i, j));
                    }
                    k += 1;
                }
            }
            Graph::new(n, edges).unwrap()
        })
    })
}

/// A connected graph: a random spanning path plus random extra edges.
pub fn arb_connected_graph(lo: usize, hi: usize) -> impl Strategy<Value = Graph> {
    (lo..=hi)
        .prop_flat_map(|n| {
            let perm = Just((0..n).collect::<Vec<usize>>()).prop_shuffle();
            (Just(n), perm, proptest::collection::vec(any::<bool>(), n * (n - 1) / 2))
        })
        .prop_map(|(n, perm, mask)| {
            let mut set = std::collections::BTreeSet::new();
            for w in perm.windows(2) {
                set.insert((w[0].min(w[1]), w[0].max(w[1])));
            }
            let mut k = 0;
            for i in 0..n {
                for j in i + 1..n {
                    if mask[k] {
                        set.insert((i, j));
                    }
                    k += 1;
                }
            }
            Graph::new(n, set).unwrap()
        })
}

/// A graph together with positive weights in `[lo_w, hi_w]`.
pub fn with_weights(
    g: impl Strategy<Value = Graph>,
    lo_w: f64,
    hi_w: f64,
) -> impl Strategy<Value = (Graph, WeightVector)> {
    g.prop_flat_map(move |g| {
        let m = g.m();
        (Just(g), proptest::collection::vec(lo_w..=hi_w, m))
    })
    .prop_map(|(g, w)| (g, WeightVector::new(w).unwrap()))
}
