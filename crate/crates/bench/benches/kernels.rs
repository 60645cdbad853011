use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pencilph_bench::{pencil_of_size, stabilizable_system};
use pencilph_core::dh::recast_dh;
use pencilph_core::numerics::ToleranceConfig;
use pencilph_core::oracle::exact_regularity;
use pencilph_core::pencil::quasi_kronecker;
use pencilph_core::recipes::StabilityClass;
use pencilph_core::stability::{check_stability, solve_lyapunov_inequality};
use pencilph_core::stabilize::build_certificates;

fn kernels(c: &mut Criterion) {
    let tol = ToleranceConfig::default();
    let mut g = c.benchmark_group("pencil");
    for n in [4, 8] {
        let p = pencil_of_size(n, StabilityClass::AsymptoticallyStable);
        g.bench_with_input(BenchmarkId::new("quasi_kronecker", n), &p, |b, p| b.iter(|| quasi_kronecker(p, &tol)));
        g.bench_with_input(BenchmarkId::new("check_stability", n), &p, |b, p| b.iter(|| check_stability(p, &tol)));
        g.bench_with_input(BenchmarkId::new("lyapunov_certificate", n), &p, |b, p| {
            b.iter(|| solve_lyapunov_inequality(p, true, &tol))
        });
        g.bench_with_input(BenchmarkId::new("recast_dh", n), &p, |b, p| b.iter(|| recast_dh(p, &tol)));
        g.bench_with_input(BenchmarkId::new("exact_regularity", n), &p, |b, p| {
            b.iter(|| exact_regularity(p.e(), p.a()))
        });
    }
    g.finish();
    let d = stabilizable_system(3);
    c.bench_function("build_certificates", |b| b.iter(|| build_certificates(&d, &tol)));
}

criterion_group!(benches, kernels);
criterion_main!(benches);
