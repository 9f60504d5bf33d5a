use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fusionspec::freeprob::{invert_to_density, ConvolutionSolver, FreeMultConv, SpectralMeasure};
use fusionspec::fusion::fusion_from_clouds;
use fusionspec::spectra::eigenvalues_general;
use fusionspec::verify::{kernel_product_density, EDGE_ETA};
use fusionspec::{Complex64, FusionKind};
use fusionspec_bench::{kernel, null_pair};

fn eigensolver(c: &mut Criterion) {
    let mut g = c.benchmark_group("eigenvalues_general");
    g.sample_size(10);
    for n in [100, 200, 400] {
        let (x, y) = null_pair(n, n);
        let m = fusion_from_clouds(&x, &y, &kernel(), FusionKind::Ncca).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &m.matrix, |b, m| {
            b.iter(|| eigenvalues_general(black_box(m.as_ref())).unwrap())
        });
    }
    g.finish();
}

fn fusion_build(c: &mut Criterion) {
    let mut g = c.benchmark_group("fusion_from_clouds");
    g.sample_size(10);
    let k = kernel();
    for n in [200, 500] {
        let (x, y) = null_pair(n, 100);
        for kind in [FusionKind::Ncca, FusionKind::Ad] {
            g.bench_function(BenchmarkId::new(kind.label(), n), |b| {
                b.iter(|| fusion_from_clouds(black_box(&x), black_box(&y), &k, kind).unwrap())
            });
        }
    }
    g.finish();
}

fn subordination(c: &mut Criterion) {
    let k = kernel();
    let nu_x = SpectralMeasure::kernel_law(&k, 500, 100).unwrap();
    let nu_y = SpectralMeasure::kernel_law(&k, 500, 500).unwrap();
    let conv = FreeMultConv::new(nu_x, nu_y).unwrap();
    let (lo, hi) = ConvolutionSolver::hull(&conv);
    let mid = Complex64::new(0.5 * (lo + hi), 1e-3);
    let edge = Complex64::new(hi, 1e-6);
    let mut g = c.benchmark_group("free_mult_solve");
    g.bench_function("bulk", |b| b.iter(|| conv.solve(black_box(mid), None).unwrap()));
    g.bench_function("edge", |b| b.iter(|| conv.solve(black_box(edge), None).unwrap()));
    g.finish();
}

fn inversion(c: &mut Criterion) {
    let k = kernel();
    let mut g = c.benchmark_group("inversion");
    g.sample_size(10);
    g.bench_function("kernel_product_density_500", |b| {
        b.iter(|| kernel_product_density(&k, black_box(500), 100, 100, EDGE_ETA).unwrap())
    });
    let a = SpectralMeasure::mp(0.5, 1.0, 0.0).unwrap();
    let bm = SpectralMeasure::mp(0.25, 1.0, 0.0).unwrap();
    let conv = FreeMultConv::new(a, bm).unwrap();
    g.bench_function("mp_times_mp", |b| b.iter(|| invert_to_density(&conv, (0.0, 5.0), 1e-6).unwrap()));
    g.finish();
}

criterion_group!(benches, eigensolver, fusion_build, subordination, inversion);
criterion_main!(benches);
