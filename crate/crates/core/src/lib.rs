//! Top-K ranking from pairwise comparisons on semi-random graphs.
//!
//! A monotone adversary may add arbitrary comparison edges to an
//! Erdős–Rényi graph. Adding edges can only add information, but it destroys
//! the degree and spectral-gap regularity that the plain maximum-likelihood
//! estimator relies on. This crate restores that regularity by reweighting
//! the observed graph and then fits a weighted Bradley–Terry–Luce model:
//!
//! 1. [`mmwu::reweight`] solves the saddle-point SDP
//!    `max_{w ∈ F} λ_{n-1}(L_w)` with matrix multiplicative weights, where `F`
//!    caps every edge weight at 1 and every weighted degree at `2pn`. Each
//!    iteration calls a best-response oracle from [`oracles`].
//! 2. [`mle::solve_mle`] minimises the weighted negative log-likelihood and
//!    [`mle::top_k`] reads off the top items.
//!
//! The weights never look at comparison outcomes; only the graph is used.
//!
//! ```
//! use semirank::{gen_er, apply_clique_adversary, reweight, MmwuParams};
//!
//! let er = gen_er(24, 0.5, 7).unwrap();
//! let sr = apply_clique_adversary(&er, 7).unwrap();
//! let params = MmwuParams::new(24, 0.5, 0.5, 7).unwrap();
//! let report = reweight(&sr, &params).unwrap();
//! assert!(report.feasible);
//! assert!(report.lambda_gap > 0.0);
//! ```

pub mod error;
pub mod experiment;
pub mod graph;
pub mod io;
pub mod mle;
pub mod mmwu;
pub mod oracles;
pub mod rng;
pub mod sampling;
pub mod spectral;

pub use error::{Error, Result};
pub use experiment::{
    diagnose, run_cluster_experiment, run_topk_experiment, Adversary, DiagnoseReport,
    ExperimentConfig, Method, TrialRecord, Thresholds,
};
pub use graph::{
    build_laplacian, is_connected, volume, weighted_degrees, Graph, LaplacianOperator,
    WeightVector, DEFAULT_CONNECTIVITY_TOL,
};
pub use mle::{
    bq_diagnostics, error_metrics, gradient, hessian_laplacian, nll, solve_mle, top_k,
    ErrorMetrics, MleSolution, ScoreVector, SolveMethod, SolveOptions,
};
pub use mmwu::{
    regret_audit, reweight, verify_feasibility, MmwuParams, OracleKind, RegretLedger,
    ReweightReport, SketchMode,
};
pub use oracles::{
    approx_packing_oracle, edge_gains, exact_lp_oracle_small, greedy_b_matching,
    greedy_dual_certificate, DualCertificate, GainVector,
};
pub use sampling::{
    apply_clique_adversary, gen_btl_scores, gen_cluster_graph, gen_er, sample_comparisons,
    BtlInstance, ComparisonData,
};
pub use spectral::{
    centered_gram_trace, conductance_lower_bound, congestion_sum, effective_resistance,
    exp_action, jl_matrix, lambda_n_minus_1, laplacian_pinv_apply, Embedding, SpectralReport,
};
