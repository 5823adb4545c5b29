//! Shared fixtures for the benchmarks.

use semirank::{apply_clique_adversary, gen_btl_scores, gen_er, sample_comparisons, BtlInstance, ComparisonData, Graph};

/// Semi-random comparison graph: ER(n, p) plus the clique adversary.
pub fn semi_random(n: usize, p: f64, seed: u64) -> Graph {
    let er = gen_er(n, p, seed).expect("valid ER parameters");
    apply_clique_adversary(&er, seed).expect("n is even")
}

/// Graph, true scores and sampled comparisons for an MLE solve.
pub struct MleFixture {
    pub graph: Graph,
    pub truth: BtlInstance,
    pub data: ComparisonData,
}

pub fn mle_fixture(n: usize, p: f64, reps: usize, seed: u64) -> MleFixture {
    let graph = gen_er(n, p, seed).expect("valid ER parameters");
    let truth = gen_btl_scores(n, n / 10 + 1, 0.5).expect("valid score parameters");
    let data = sample_comparisons(&graph, &truth, reps, seed).expect("sampling succeeds");
    MleFixture { graph, truth, data }
}
