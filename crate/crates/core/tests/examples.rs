//! Worked networks: CBP enumeration, compound assembly and the closed forms
//! of the constructed Lyapunov functions.

use std::fs;

use crn_lyap::balance::{self, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crn_lyap::cbp::{self, Candidates, ScalingMatrix};
use crn_lyap::compose::{self, Compound};
use crn_lyap::lyapunov::{self, LyapunovFunction};
use crn_lyap::{parse_network, structure, ReactionNetwork};
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn data(name: &str) -> String {
    fs::read_to_string(format!("{}/../../data/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn network(name: &str) -> ReactionNetwork {
    parse_network(&data(name)).unwrap()
}

fn compound(name: &str) -> Compound {
    compose::parse_compound(&data(name)).unwrap()
}

fn r(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

#[test]
fn calvin_scalings_and_rates() {
    let net = network("calvin.crn");
    let sets = cbp::feasible_scalings(&net, cbp::DEFAULT_MAX_DENOMINATOR);
    assert_eq!(
        sets[0],
        Candidates::Values(vec![r(1, 1), r(5, 4), r(5, 3), r(5, 2), r(5, 1)])
    );
    for s in &sets[1..] {
        assert_eq!(*s, Candidates::Values(vec![r(1, 1)]));
    }
    let out = cbp::enumerate_cbp(&net, cbp::DEFAULT_MAX_DENOMINATOR, cbp::DEFAULT_LIMIT);
    let d1: Vec<BigRational> = out.iter().map(|c| c.scaling.diag[0].clone()).collect();
    assert_eq!(d1, vec![r(5, 4), r(5, 3), r(5, 2), r(5, 1)]);
    let k1: Vec<BigRational> = out
        .iter()
        .map(|c| c.network.reactions()[0].rate.to_rational())
        .collect();
    assert_eq!(
        k1,
        vec![r(3125, 1024), r(3125, 243), r(3125, 32), r(3125, 1)]
    );
    // S2 -> 5S1 + S6 becomes S2 -> (5/d1) S1 + S6
    let back: Vec<u32> = out
        .iter()
        .map(|c| c.network.reactions()[1].product.coeff(0))
        .collect();
    assert_eq!(back, vec![4, 3, 2, 1]);
    let front: Vec<u32> = out
        .iter()
        .map(|c| c.network.reactions()[0].product.coeff(0))
        .collect();
    assert_eq!(front, vec![1, 2, 3, 4]);
}

#[test]
fn birth_death_cbp_and_source_recovery() {
    let net = network("birth_death.crn");
    let d = ScalingMatrix::new(vec![r(2, 1)]).unwrap();
    let out = cbp::apply_scaling(&net, &d).unwrap();
    assert_eq!(out.network, network("birth_death_cbp.crn"));
    let (w, src) = cbp::recover_scaling(&out.network, &[0.5], 64).unwrap();
    assert_eq!(w, vec![r(2, 1)]);
    assert_eq!(src, net);
}

#[test]
fn birth_death_weighted_pde() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let (k1, k2): (f64, f64) = (rng.random_range(0.1..10.0), rng.random_range(0.1..10.0));
        let text = format!("species S1\n2S1 -> S1 @ {}\n0 -> S1 @ {k2}\n", 4.0 * k1);
        let net = parse_network(&text).unwrap();
        let eq = balance::find_equilibrium(&net, &[1.0], DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let exact = (k2 / (4.0 * k1)).sqrt();
        assert!(
            (eq.point[0] - exact).abs() < 1e-10,
            "{} vs {exact}",
            eq.point[0]
        );
        let f = lyapunov::build_pseudo_helmholtz(&eq.point, Some(&[2.0])).unwrap();
        for _ in 0..5 {
            let x = [log_uniform(&mut rng, exact / 10.0, exact * 10.0)];
            assert!(lyapunov::pde_residual(&net, &f, &x).unwrap().abs() < 1e-10);
        }
    }
}

#[test]
fn ex44_structure_and_equilibrium() {
    let c = compound("ex44.crnc");
    let s = structure::analyze(&c.network);
    assert_eq!((s.dim_s, s.deficiency), (3, 2));
    assert!(!s.weakly_reversible);
    let eq = balance::find_equilibrium(
        &c.network,
        &[1.1, 3.5, 1.2, 0.8],
        DEFAULT_TOL,
        DEFAULT_MAX_ITER,
    )
    .unwrap();
    for (a, b) in eq.point.iter().zip([1.0, 4.0, 1.0, 1.0]) {
        assert!((a - b).abs() < 1e-10, "{:?}", eq.point);
    }
    let field = c.network.vector_field(&[1.0, 4.0, 1.0, 1.0]).unwrap();
    assert!(field.iter().all(|v| v.abs() < 1e-12));
    assert_eq!(
        structure::decompose_species_independent(&c.network).len(),
        2
    );
}

#[test]
fn ex44_cbp_part_comes_from_the_balanced_source() {
    let src = network("ex44_source.crn");
    assert!(balance::is_complex_balanced_at(&src, &[1.0, 2.0], 1e-12));
    let d = ScalingMatrix::new(vec![r(1, 1), r(1, 2)]).unwrap();
    let out = cbp::apply_scaling(&src, &d).unwrap();
    let c = compound("ex44.crnc");
    // the compound renames species, so compare complexes and exact rates
    let shape = |n: &ReactionNetwork| {
        let mut v: Vec<_> = n
            .reactions()
            .iter()
            .map(|x| {
                (
                    x.reactant.to_dense(2),
                    x.product.to_dense(2),
                    x.rate.to_rational(),
                )
            })
            .collect();
        v.sort();
        v
    };
    assert_eq!(shape(&out.network), shape(&c.spec.cbp_part));
    let (w, _) = cbp::recover_scaling(&c.spec.cbp_part, &[1.0, 4.0], 64).unwrap();
    assert_eq!(w, vec![r(1, 1), r(1, 2)]);
}

fn ex44_part() -> ReactionNetwork {
    compound("ex44.crnc").spec.parts[0].network.clone()
}

#[test]
fn ex44_u_tilde_closed_form() {
    let part = ex44_part();
    let LyapunovFunction::OneDimIntegral(flipped) =
        lyapunov::build_onedim_with_omega(&part, &[1.0, 1.0], &[-1, 1]).unwrap()
    else {
        panic!()
    };
    let LyapunovFunction::OneDimIntegral(ours) =
        lyapunov::build_onedim(&part, &[1.0, 1.0]).unwrap()
    else {
        panic!()
    };
    assert_eq!(flipped.betas, vec![2, -1]);
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for _ in 0..50 {
        let x: [f64; 2] = [rng.random_range(0.1..10.0), rng.random_range(0.1..10.0)];
        let closed =
            (-x[0] * x[0] + x[0] * (x[0] * x[0] + 8.0 * x[1]).sqrt()) / (2.0 * x[0] * x[0]);
        let u = flipped.u_tilde(&x).unwrap();
        assert!(close(u, closed, 1e-12), "{u} vs {closed}");
        assert!(close(ours.u_tilde(&x).unwrap(), 1.0 / closed, 1e-12));
        assert!(flipped.h(&x, u).abs() < 1e-12 * (x[0] * x[0] + x[1]));
        assert!(close(flipped.gamma(&x), (x[1] - x[0]) / 2.0, 1e-15));
        let y = flipped.anchor(&x);
        assert!(close(y[0], (x[0] + x[1]) / 2.0, 1e-15) && close(y[1], (x[0] + x[1]) / 2.0, 1e-15));
        // the function itself does not see the orientation of ω
        assert!(close(value_of(&flipped, &x), value_of(&ours, &x), 1e-10));
    }
    assert_eq!(flipped.side_condition(), -6.0);
    assert_eq!(ours.side_condition(), -6.0);
}

fn value_of(f: &lyapunov::OneDimIntegral, x: &[f64]) -> f64 {
    LyapunovFunction::OneDimIntegral(Box::new(f.clone()))
        .value(x)
        .unwrap()
}

#[test]
fn ex44_compound_function() {
    let c = compound("ex44.crnc");
    let star = [1.0, 4.0, 1.0, 1.0];
    let f = lyapunov::build_compound(&c.spec, &star).unwrap();
    assert_eq!(f.family(), "compound_sub1");
    assert!(f.value(&star).unwrap().abs() < 1e-14);
    assert!(f.gradient(&star).unwrap().iter().all(|g| g.abs() < 1e-12));
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(0.1..10.0)).collect();
        let res = lyapunov::pde_residual(&c.network, &f, &x).unwrap();
        assert!(res.abs() < 1e-8, "{res} at {x:?}");
    }
    let h = f.hessian(&star).unwrap();
    assert!(close(h[(0, 0)], 1.0, 1e-12) && close(h[(1, 1)], 0.5 / 4.0, 1e-12));
    let report = lyapunov::stability_conditions(&c.network, &f, &star);
    assert!(report.certified, "{report:?}");
    assert_eq!(report.side_conditions[0].value, -6.0);
}

#[test]
fn ex57_hessian_and_value_closed_forms() {
    let c = compound("ex57.crnc");
    let s = structure::analyze(&c.network);
    assert_eq!((s.dim_s, s.deficiency), (2, 2));
    assert_eq!(
        structure::decompose_species_independent(&c.network).len(),
        1
    );
    let star = [1.0, 1.0, 1.0];
    assert!(c
        .network
        .vector_field(&star)
        .unwrap()
        .iter()
        .all(|v| v.abs() < 1e-14));
    let f = lyapunov::build_compound(&c.spec, &star).unwrap();
    let (k11, k21, k2) = (2.0, 1.0, 3.0);
    let mut rng = ChaCha8Rng::seed_from_u64(57);
    for _ in 0..50 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..10.0)).collect();
        let h = f.hessian(&x).unwrap();
        let want = [1.0 / x[0], 2.0 / x[1], k11 / (x[2] * (k11 + k21 * x[2]))];
        for j in 0..3 {
            assert!(close(h[(j, j)], want[j], 1e-12));
            for l in 0..3 {
                if l != j {
                    assert_eq!(h[(j, l)], 0.0);
                }
            }
        }
        let ph = |x: f64, s: f64| s - x - x * (s / x).ln();
        let lg = |x3: f64| (k11 + k21 * x3) * (star[0] * (k11 + k21 * x3)).ln();
        let closed = ph(x[0], star[0]) + 2.0 * ph(x[1], star[1]) + x[2] * (k2 * x[2]).ln()
            - star[2] * (k2 * star[2]).ln()
            - (lg(x[2]) - lg(star[2])) / k21;
        assert!(close(f.value(&x).unwrap(), closed, 1e-10));
        assert!(lyapunov::pde_residual(&c.network, &f, &x).unwrap().abs() < 1e-10);
    }
}

#[test]
fn ex58_conditions_and_hessian() {
    let c = compound("ex58.crnc");
    let s = structure::analyze(&c.network);
    assert_eq!(
        (s.dim_s, s.deficiency, c.network.num_reactions()),
        (3, 4, 8)
    );
    let star = [1.0, 4.0, 1.0];
    let f = lyapunov::build_compound(&c.spec, &star).unwrap();
    let shape = c.spec.parts[0].shape.as_ref().unwrap();
    assert_eq!(shape.stability_sum(1.0), 5.0);
    let roots = balance::autoca_roots(shape, 1.0);
    assert_eq!(roots.count, 2);
    assert_eq!(roots.roots, vec![1.0, 2.0]);
    let u = compose::check_uniqueness_conditions(&c.spec, Some(&star));
    assert!(u.uniqueness_guaranteed);
    // the conditions hold, yet the full-dimensional class also holds the root x3 = 2
    let field = c.network.vector_field(&[1.0, 4.0, 2.0]).unwrap();
    assert!(field.iter().all(|v| v.abs() < 1e-12), "{field:?}");
    let other = lyapunov::build_compound(&c.spec, &[1.0, 4.0, 2.0]).unwrap();
    assert_eq!(shape.stability_sum(2.0), -12.0);
    assert!(!lyapunov::stability_conditions(&c.network, &other, &[1.0, 4.0, 2.0]).certified);
    assert_eq!(u.stability_guaranteed, Some(true));
    let mut rng = ChaCha8Rng::seed_from_u64(58);
    for _ in 0..50 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..10.0)).collect();
        let h = f.hessian(&x).unwrap();
        let x3 = x[2];
        let third =
            (8.0 - x3 * x3 - 2.0 * x3.powi(3)) / (x3 * (8.0 + 2.0 * x3 + x3 * x3 + x3.powi(3)));
        assert!(close(h[(0, 0)], 1.0 / x[0], 1e-12));
        assert!(close(h[(1, 1)], 0.5 / x[1], 1e-12));
        assert!(close(h[(2, 2)], third, 1e-12));
        assert!(lyapunov::pde_residual(&c.network, &f, &x).unwrap().abs() < 1e-10);
    }
    let report = lyapunov::stability_conditions(&c.network, &f, &star);
    assert!(report.certified);
    assert_eq!(report.side_conditions[0].value, 5.0);
}

#[test]
fn reaction_vector_balanced_network() {
    let net = network("reaction_vector.crn");
    let s = structure::analyze(&net);
    assert_eq!(s.dim_s, 1);
    let eq = balance::find_equilibrium(&net, &[0.7, 1.3], DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    assert!((eq.point[0] - 1.0).abs() < 1e-10 && (eq.point[1] - 1.0).abs() < 1e-10);
    assert!(eq.classification.is_reaction_vector_balanced);
    assert!(balance::is_reaction_vector_balanced_at(
        &net,
        &[1.0, 1.0],
        1e-12
    ));
    let f = lyapunov::build_onedim(&net, &eq.point).unwrap();
    let report = lyapunov::stability_conditions(&net, &f, &eq.point);
    assert!(report.certified, "{report:?}");
}
