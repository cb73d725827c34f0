use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use helmfosls::minres::{harmonic_ritz_values, minres_solve};
use helmfosls::precond::SchurPreconditioner;
use helmfosls::{assemble_system, BlockPreconditioner, PrecondOptions, PrecondTree, StoppingPolicy, C64};
use helmfosls_bench::Fixture;

fn assembly(c: &mut Criterion) {
    let mut g = c.benchmark_group("assembly");
    g.sample_size(10);
    for r in [4, 6] {
        let f = Fixture::unit_square(r, 10.0, 3);
        let mesh = f.hierarchy.finest();
        g.bench_with_input(BenchmarkId::from_parameter(f.system.dim()), &r, |b, _| {
            b.iter(|| assemble_system(mesh, &f.trial, f.spaces.last().unwrap(), &f.data).unwrap())
        });
    }
    g.finish();
}

fn v_cycle(c: &mut Criterion) {
    let mut g = c.benchmark_group("v_cycle");
    g.sample_size(10);
    for (pt, condense) in [(3, false), (4, false), (4, true)] {
        let f = Fixture::unit_square(5, 10.0, pt);
        let opts = PrecondOptions { condense: Some(condense), ..Default::default() };
        let tree = PrecondTree::build(&f.hierarchy, &f.spaces, 10.0, Some(&f.system.m_v), &opts, None).unwrap();
        let x = vec![C64::new(1.0, -0.5); tree.dim()];
        let id = format!("p{pt}_{}", if condense { "condensed" } else { "plain" });
        g.bench_function(id, |b| b.iter(|| tree.apply(&x)));
    }
    g.finish();
}

fn minres(c: &mut Criterion) {
    let mut g = c.benchmark_group("minres");
    g.sample_size(10);
    let f = Fixture::unit_square(6, 10.0, 3);
    let tree = PrecondTree::build(&f.hierarchy, &f.spaces, 10.0, Some(&f.system.m_v), &PrecondOptions::default(), None).unwrap();
    let bp = BlockPreconditioner { test: tree, schur: SchurPreconditioner::Identity };
    for (name, policy) in [("residual_drop_1e8", StoppingPolicy::residual_drop(1e8)), ("algebraic_vs_total", StoppingPolicy::default())] {
        g.bench_function(name, |b| b.iter(|| minres_solve(&f.system, &bp, None, &policy, None, None).unwrap()));
    }
    let alpha: Vec<f64> = (0..200).map(|i| if i % 2 == 0 { 0.3 } else { -0.2 }).collect();
    let beta: Vec<f64> = vec![0.4; 200];
    g.bench_function("harmonic_ritz_200", |b| b.iter(|| harmonic_ritz_values(&alpha, &beta)));
    g.finish();
}

criterion_group!(benches, assembly, v_cycle, minres);
criterion_main!(benches);
