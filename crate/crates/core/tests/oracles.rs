mod common;

use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use semirank::oracles::approx_packing_oracle_with_budget;
use semirank::{
    approx_packing_oracle, edge_gains, exact_lp_oracle_small, greedy_b_matching, greedy_dual_certificate,
    spectral::Embedding, Error, GainVector, Graph, WeightVector,
};

/// LP optimum by enumerating every point of `{0, ½, 1}^m` that respects the
/// degree caps. The polytope's vertices are half-integral, so this is exact.
fn brute_force_lp(g: &Graph, c: &[f64], b: usize) -> f64 {
    let m = g.m();
    let mut best = 0.0f64;
    let mut digits = vec![0u8; m];
    loop {
        let mut deg = vec![0u32; g.n()];
        for (e, &(i, j)) in g.edges().iter().enumerate() {
            deg[i] += digits[e] as u32;
            deg[j] += digits[e] as u32;
        }
        if deg.iter().all(|&d| d <= 2 * b as u32) {
            let value: f64 = digits.iter().zip(c).map(|(&d, &x)| d as f64 * 0.5 * x).sum();
            best = best.max(value);
        }
        let mut pos = 0;
        loop {
            if pos == m {
                return best;
            }
            digits[pos] += 1;
            if digits[pos] < 3 {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}

fn degrees(g: &Graph, w: &[f64]) -> Vec<f64> {
    let mut d = vec![0.0; g.n()];
    for (&(i, j), &x) in g.edges().iter().zip(w) {
        d[i] += x;
        d[j] += x;
    }
    d
}

fn packing_feasible(g: &Graph, w: &[f64], b: usize) -> bool {
    w.iter().all(|&x| (-1e-12..=1.0 + 1e-12).contains(&x)) && degrees(g, w).iter().all(|&d| d <= b as f64 + 1e-9)
}

/// Small graph, budget and integer-valued gains (ties are common).
fn arb_instance(max_n: usize) -> impl Strategy<Value = (Graph, GainVector, usize)> {
    arb_graph(2, max_n)
        .prop_filter("at most 9 edges", |g| g.m() <= 9)
        .prop_flat_map(|g| {
            let m = g.m();
            (Just(g), proptest::collection::vec(0u8..6, m), 1usize..4)
        })
        .prop_map(|(g, c, b)| (g, GainVector::new(c.into_iter().map(f64::from).collect()).unwrap(), b))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    #[test]
    fn greedy_is_a_maximal_half_approximation((g, c, b) in arb_instance(6)) {
        let w = greedy_b_matching(&g, &c, b).unwrap();
        prop_assert!(w.as_slice().iter().all(|&x| x == 0.0 || x == 1.0));
        prop_assert!(packing_feasible(&g, w.as_slice(), b));
        let d = degrees(&g, w.as_slice());
        for (e, &(i, j)) in g.edges().iter().enumerate() {
            if c[e] > 0.0 && w[e] == 0.0 {
                prop_assert!(d[i] >= b as f64 || d[j] >= b as f64, "edge {} could be added", e);
            }
        }
        let opt = brute_force_lp(&g, c.as_slice(), b);
        prop_assert!(c.value(&w) >= opt / 2.0 - 1e-12);
    }

    #[test]
    fn dual_certificate_is_feasible_and_sandwiches((g, c, b) in arb_instance(6)) {
        let w = greedy_b_matching(&g, &c, b).unwrap();
        let cert = greedy_dual_certificate(&g, &c, b, &w).unwrap();
        prop_assert!(cert.s.iter().chain(&cert.ell).all(|&x| x >= 0.0));
        for (e, &(i, j)) in g.edges().iter().enumerate() {
            prop_assert!(cert.s[i] + cert.s[j] + cert.ell[e] >= c[e] - 1e-12);
        }
        let value = b as f64 * cert.s.iter().sum::<f64>() + cert.ell.iter().sum::<f64>();
        prop_assert!((value - cert.value).abs() < 1e-9);
        let opt = brute_force_lp(&g, c.as_slice(), b);
        let greedy = c.value(&w);
        prop_assert!(opt <= cert.value + 1e-9);
        prop_assert!(cert.value <= 2.0 * greedy + 1e-9);
    }

    #[test]
    fn exact_and_flow_oracles_reach_the_optimum((g, c, b) in arb_instance(6)) {
        let opt = brute_force_lp(&g, c.as_slice(), b);
        let (value, w) = exact_lp_oracle_small(&g, &c, b).unwrap();
        prop_assert!((value - opt).abs() < 1e-9);
        prop_assert!((c.value(&w) - opt).abs() < 1e-9);
        prop_assert!(packing_feasible(&g, w.as_slice(), b));

        for eps in [0.5, 0.1] {
            let flow = approx_packing_oracle(&g, &c, b, eps).unwrap();
            prop_assert!(packing_feasible(&g, flow.as_slice(), b));
            prop_assert!(flow.as_slice().iter().all(|&x| (2.0 * x).fract() == 0.0));
            prop_assert!(c.value(&flow) >= (1.0 - eps) * opt - 1e-9);
            prop_assert!((c.value(&flow) - opt).abs() < 1e-9);
        }
    }

    #[test]
    fn oracles_are_deterministic((g, c, b) in arb_instance(6)) {
        prop_assert_eq!(greedy_b_matching(&g, &c, b).unwrap(), greedy_b_matching(&g, &c, b).unwrap());
        prop_assert_eq!(
            approx_packing_oracle(&g, &c, b, 0.25).unwrap(),
            approx_packing_oracle(&g, &c, b, 0.25).unwrap()
        );
    }

    #[test]
    fn gains_are_squared_row_distances(
        g in arb_graph(2, 9),
        cols in 1usize..5,
        entries in proptest::collection::vec(-2.0f64..2.0, 9 * 4),
    ) {
        let n = g.n();
        let v = DMatrix::from_fn(n, cols, |r, c| entries[r * 4 + c]);
        let gains = edge_gains(&g, &Embedding::new(v.clone())).unwrap();
        let x = &v * v.transpose();
        for (e, &(i, j)) in g.edges().iter().enumerate() {
            let mut le = vec![0.0; g.m()];
            le[e] = 1.0;
            let l_e = dense_laplacian(n, g.edges(), &le);
            let want = (l_e * &x).trace();
            prop_assert!((gains[e] - want).abs() < 1e-10 * want.max(1.0));
            prop_assert!((gains[e] - (v.row(i) - v.row(j)).norm_squared()).abs() < 1e-10 * want.max(1.0));
        }
    }
}

#[test]
fn larger_instances_against_exact_oracle() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
    for _ in 0..40 {
        let n = rng.gen_range(4..9);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if edges.len() < 20 && rng.gen_bool(0.6) {
                    edges.push((i, j));
                }
            }
        }
        let g = Graph::new(n, edges).unwrap();
        let c = GainVector::new((0..g.m()).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
        let b = rng.gen_range(1..4);
        let (opt, _) = exact_lp_oracle_small(&g, &c, b).unwrap();
        let greedy = greedy_b_matching(&g, &c, b).unwrap();
        let cert = greedy_dual_certificate(&g, &c, b, &greedy).unwrap();
        let flow = approx_packing_oracle(&g, &c, b, 0.1).unwrap();
        assert!(c.value(&greedy) >= opt / 2.0 - 1e-12);
        assert!(opt <= cert.value + 1e-9 && cert.value <= 2.0 * c.value(&greedy) + 1e-9);
        assert!((c.value(&flow) - opt).abs() < 1e-9);
    }
}

#[test]
fn zero_gains_give_the_empty_response() {
    let g = Graph::complete(5).unwrap();
    let c = GainVector::new(vec![0.0; g.m()]).unwrap();
    assert_eq!(greedy_b_matching(&g, &c, 2).unwrap(), WeightVector::zeros(g.m()));
    assert_eq!(c.value(&approx_packing_oracle(&g, &c, 2, 0.5).unwrap()), 0.0);
}

#[test]
fn rejects_bad_inputs() {
    let g = Graph::complete(6).unwrap();
    let c = GainVector::new(vec![1.0; g.m()]).unwrap();
    assert!(matches!(exact_lp_oracle_small(&g, &c, 2), Ok(_)));
    let big = Graph::complete(7).unwrap();
    let c_big = GainVector::new(vec![1.0; big.m()]).unwrap();
    assert!(matches!(exact_lp_oracle_small(&big, &c_big, 2), Err(Error::InstanceTooLarge(_))));
    assert!(greedy_b_matching(&g, &GainVector::new(vec![1.0; 3]).unwrap(), 2).is_err());
    assert!(GainVector::new(vec![-1.0]).is_err());
    assert!(approx_packing_oracle(&g, &c, 2, 0.75).is_err());
    assert!(matches!(
        approx_packing_oracle_with_budget(&g, &c, 2, 0.5, 0),
        Err(Error::PackingBudgetExceeded { .. })
    ));
}
