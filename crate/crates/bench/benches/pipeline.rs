use criterion::{black_box, criterion_group, criterion_main, Criterion};
use crn_lyap::balance::{self, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crn_lyap::{cbp, lyapunov, sim, structure};
use crn_lyap_bench::{compound, network};

fn cbp_enumeration(c: &mut Criterion) {
    let calvin = network("calvin.crn");
    c.bench_function("calvin feasible scalings", |b| {
        b.iter(|| cbp::feasible_scalings(black_box(&calvin), cbp::DEFAULT_MAX_DENOMINATOR))
    });
    c.bench_function("calvin enumerate", |b| {
        b.iter(|| {
            cbp::enumerate_cbp(
                black_box(&calvin),
                cbp::DEFAULT_MAX_DENOMINATOR,
                cbp::DEFAULT_LIMIT,
            )
        })
    });
    c.bench_function("calvin structure", |b| {
        b.iter(|| structure::analyze(black_box(&calvin)))
    });
}

fn certificates(c: &mut Criterion) {
    let ex44 = compound("ex44.crnc");
    let f44 = lyapunov::build_compound(&ex44.spec, &[1.0, 4.0, 1.0, 1.0]).unwrap();
    let ex58 = compound("ex58.crnc");
    let f58 = lyapunov::build_compound(&ex58.spec, &[1.0, 4.0, 1.0]).unwrap();
    let x44 = [1.7, 2.3, 0.6, 1.4];
    let x58 = [1.7, 2.3, 0.6];
    c.bench_function("sub1 compound value", |b| {
        b.iter(|| f44.value(black_box(&x44)).unwrap())
    });
    c.bench_function("sub1 compound hessian", |b| {
        b.iter(|| f44.hessian(black_box(&x44)).unwrap())
    });
    c.bench_function("sub1 compound pde residual", |b| {
        b.iter(|| lyapunov::pde_residual(&ex44.network, &f44, black_box(&x44)).unwrap())
    });
    c.bench_function("autoca compound value", |b| {
        b.iter(|| f58.value(black_box(&x58)).unwrap())
    });
    c.bench_function("autoca compound pde residual", |b| {
        b.iter(|| lyapunov::pde_residual(&ex58.network, &f58, black_box(&x58)).unwrap())
    });
    c.bench_function("build sub1 compound", |b| {
        b.iter(|| lyapunov::build_compound(&ex44.spec, black_box(&[1.0, 4.0, 1.0, 1.0])).unwrap())
    });
}

fn dynamics(c: &mut Criterion) {
    let ex44 = compound("ex44.crnc");
    c.bench_function("sub1 compound equilibrium", |b| {
        b.iter(|| {
            balance::find_equilibrium(
                &ex44.network,
                black_box(&[1.1, 3.5, 1.2, 0.8]),
                DEFAULT_TOL,
                DEFAULT_MAX_ITER,
            )
        })
    });
    c.bench_function("sub1 compound simulate t=200", |b| {
        b.iter(|| {
            sim::integrate(
                &ex44.network,
                black_box(&[1.2, 3.8, 0.9, 1.1]),
                200.0,
                1e-8,
                1e-10,
                None,
            )
            .unwrap()
        })
    });
}

criterion_group!(benches, cbp_enumeration, certificates, dynamics);
criterion_main!(benches);
