use criterion::{criterion_group, criterion_main, Criterion};
use maglab_core::checks::{conformal_torus, demo_boundary_jets};
use maglab_core::cosphere::{bracket_residuals_on, CosphereGrid};
use maglab_core::disk::{disk_dn_oracle, OracleOptions};
use maglab_core::field::{ScalarField, TrigSeries};
use maglab_core::geometry::make_flat_torus;
use maglab_core::hyperbolic::{build_genus2_group, enumerate_with, geodesic_length, EnumerationOptions};
use maglab_core::magnetic::{assemble_schrodinger, eigenvalues_only, PotentialData};
use maglab_core::steklov::{symbol_factorize, SymbolOptions};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::hint::black_box;

fn lengths(c: &mut Criterion) {
    let group = build_genus2_group();
    let systole = group.generators.iter().map(|g| geodesic_length(g).unwrap()).fold(f64::INFINITY, f64::min);
    c.bench_function("enumerate genus-2 classes to twice the systole", |b| {
        b.iter(|| enumerate_with(&group, black_box(2.0 * systole), EnumerationOptions::default()).unwrap())
    });
}

fn brackets(c: &mut Criterion) {
    let grid = CosphereGrid::new(&conformal_torus().unwrap(), 32, 48).unwrap();
    let u = grid.sample(&|x, t| Complex64::new((x[0] + 2.0 * t).cos(), (x[1] - t).sin()));
    c.bench_function("bracket residuals on a 32x32x48 cosphere grid", |b| b.iter(|| bracket_residuals_on(&grid, black_box(&u)).unwrap()));
}

fn schrodinger(c: &mut Criterion) {
    let p = [2.0 * PI; 2];
    let a = vec![
        ScalarField::Trig(TrigSeries::constant(&p, 0.3).with_term(&[1, 0], 0.2, 0.1)),
        ScalarField::Trig(TrigSeries::constant(&p, -0.1).with_term(&[1, 1], 0.1, 0.0)),
    ];
    let q = ScalarField::Trig(TrigSeries::constant(&p, 0.5).with_term(&[0, 1], 0.2, 0.0));
    let pot = PotentialData::new(make_flat_torus(&p, 16).unwrap(), a, q).unwrap();
    c.bench_function("torus Galerkin matrix and 50 eigenvalues at cutoff 16", |b| {
        b.iter(|| {
            let m = assemble_schrodinger(black_box(&pot), 16).unwrap();
            eigenvalues_only(&m.matrix, 50).unwrap()
        })
    });
}

fn steklov(c: &mut Criterion) {
    let jets = demo_boundary_jets(4);
    let opts = SymbolOptions { grid: 6, fiber_samples: 64 };
    c.bench_function("DN symbol to order 4 on a 6x6 boundary grid", |b| b.iter(|| symbol_factorize(black_box(&jets), 4, opts).unwrap()));
    c.bench_function("disk DN oracle at k = 32", |b| {
        b.iter(|| disk_dn_oracle(&[], &[0.5], black_box(32), OracleOptions::default()).unwrap())
    });
}

criterion_group! {
    name = kernels;
    config = Criterion::default().sample_size(10);
    targets = lengths, brackets, schrodinger, steklov
}
criterion_main!(kernels);
