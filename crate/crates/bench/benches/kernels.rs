// Copyright 2026 vflux Contributors
// SPDX-License-Identifier: Apache-2.0

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use vflux_core::analysis::{amplification, rectification};
use vflux_core::{
    build_counting_generator, build_generator, cumulants_perturbative, heat_currents, presets,
    steady_state, Bath, CountingFields, CountingKind,
};

fn bench_generator(c: &mut Criterion) {
    let spec = presets::fig3(0.8, 1.0, 1.5, 0.5);
    c.bench_function("build_generator", |b| {
        b.iter(|| build_generator(black_box(&spec)))
    });
    let chi = CountingFields::on(Bath::Right, 0.3, CountingKind::Energy);
    c.bench_function("build_counting_generator", |b| {
        b.iter(|| build_counting_generator(black_box(&spec), &chi))
    });
}

fn bench_steady(c: &mut Criterion) {
    let spec = presets::fig5(0.01, 0.5);
    let gen = build_generator(&spec).unwrap();
    c.bench_function("steady_state", |b| b.iter(|| steady_state(black_box(&gen))));
    c.bench_function("heat_currents", |b| {
        b.iter(|| heat_currents(black_box(&spec)))
    });
}

fn bench_statistics(c: &mut Criterion) {
    let spec = presets::fig2(0.3, 0.7);
    c.bench_function("cumulants_order4", |b| {
        b.iter(|| cumulants_perturbative(black_box(&spec), Bath::Right, CountingKind::Energy, 4))
    });
}

fn bench_figures_of_merit(c: &mut Criterion) {
    let spec = presets::fig3(0.76, 0.98, 1.0, 1.0);
    c.bench_function("rectification", |b| {
        b.iter(|| rectification(black_box(&spec), 1.0, 1.0))
    });
    let cyc = presets::fig4(0.5);
    c.bench_function("amplification", |b| {
        b.iter(|| amplification(black_box(&cyc), 0.5, None))
    });
}

criterion_group!(kernels, bench_generator, bench_steady);
criterion_group!(figures, bench_statistics, bench_figures_of_merit);
criterion_main!(kernels, figures);
