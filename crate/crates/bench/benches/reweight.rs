use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use semirank::{exp_action, greedy_b_matching, jl_matrix, reweight, GainVector, MmwuParams, SketchMode, WeightVector};
use semirank_bench::semi_random;

fn mmwu(c: &mut Criterion) {
    let mut group = c.benchmark_group("reweight_50_iters");
    group.sample_size(10);
    for n in [60, 120] {
        let g = semi_random(n, 0.3, 1);
        for (name, sketch) in [("exact", SketchMode::Exact), ("jl", SketchMode::Jl)] {
            let params = MmwuParams::new(n, 0.3, 0.25, 1).unwrap().with_sketch(sketch).with_iterations(50).with_c_jl(1.0);
            group.bench_with_input(BenchmarkId::new(name, n), &params, |b, params| b.iter(|| reweight(&g, params).unwrap()));
        }
    }
    group.finish();
}

fn building_blocks(c: &mut Criterion) {
    let g = semi_random(200, 0.2, 2);
    let w = WeightVector::ones(g.m());
    let v0 = jl_matrix(g.n(), 32, 3).unwrap();
    c.bench_function("exp_action_n200_k32", |b| b.iter(|| exp_action(&g, &w, 0.01, &v0, 1e-6).unwrap()));

    let gains = GainVector::new((0..g.m()).map(|e| ((e * 7919) % 1000) as f64).collect()).unwrap();
    c.bench_function("greedy_b_matching_n200", |b| b.iter(|| greedy_b_matching(&g, &gains, 80).unwrap()));
}

criterion_group!(benches, mmwu, building_blocks);
criterion_main!(benches);
