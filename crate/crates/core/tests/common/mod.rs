#![allow(dead_code)]

use std::fs;

use crn_lyap::cbp;
use crn_lyap::compose::{self, Compound};
use crn_lyap::lyapunov::{self, LyapunovFunction};
use crn_lyap::model::{Complex, Rate, Reaction};
use crn_lyap::{parse_network, ReactionNetwork};
use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn data(name: &str) -> String {
    fs::read_to_string(format!("{}/../../data/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

pub fn network(name: &str) -> ReactionNetwork {
    parse_network(&data(name)).unwrap()
}

pub fn compound(name: &str) -> Compound {
    compose::parse_compound(&data(name)).unwrap()
}

pub fn rat(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

pub fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo.ln()..hi.ln()).exp()
}

pub fn random_state(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| log_uniform(rng, lo, hi)).collect()
}

/// `a` agrees with `b` up to `tol` relative to `max(1, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

/// `m' S1 <-> m S2`, complex balanced at `x_star` with forward rate `k1`.
pub fn two_complex(mp: u32, m: u32, k1: f64, x_star: [f64; 2]) -> ReactionNetwork {
    let k2 = k1 * x_star[0].powi(mp as i32) / x_star[1].powi(m as i32);
    ReactionNetwork::new(
        vec!["S1".into(), "S2".into()],
        vec![
            Reaction::new(
                Complex::from_terms([(0, mp)]),
                Complex::from_terms([(1, m)]),
                Rate::Float(k1),
            ),
            Reaction::new(
                Complex::from_terms([(1, m)]),
                Complex::from_terms([(0, mp)]),
                Rate::Float(k2),
            ),
        ],
    )
    .unwrap()
}

/// Reversible chain `S1 <-> S2 <-> … <-> Sn`, complex balanced at `x_star`.
pub fn monomolecular_chain(forward: &[f64], x_star: &[f64]) -> ReactionNetwork {
    let n = x_star.len();
    let mut reactions = Vec::new();
    for j in 0..n - 1 {
        let back = forward[j] * x_star[j] / x_star[j + 1];
        reactions.push(Reaction::new(
            Complex::from_terms([(j, 1)]),
            Complex::from_terms([(j + 1, 1)]),
            Rate::Float(forward[j]),
        ));
        reactions.push(Reaction::new(
            Complex::from_terms([(j + 1, 1)]),
            Complex::from_terms([(j, 1)]),
            Rate::Float(back),
        ));
    }
    ReactionNetwork::new((1..=n).map(|j| format!("S{j}")).collect(), reactions).unwrap()
}

fn complex_strategy(n: usize) -> impl Strategy<Value = Complex> {
    prop::collection::vec(0u32..4, n).prop_map(|c| Complex::from_dense(&c))
}

fn rate_strategy() -> impl Strategy<Value = Rate> {
    prop_oneof![
        (1i64..20, 1i64..9).prop_map(|(p, q)| Rate::Exact(rat(p, q))),
        (0.01f64..50.0).prop_map(Rate::Float),
    ]
}

/// Small valid networks with up to four species and six reactions.
pub fn network_strategy() -> impl Strategy<Value = ReactionNetwork> {
    (1usize..=4).prop_flat_map(|n| {
        prop::collection::vec(
            (complex_strategy(n), complex_strategy(n), rate_strategy()),
            1..=6,
        )
        .prop_filter_map("valid network", move |rs| {
            let reactions = rs
                .into_iter()
                .map(|(a, b, k)| Reaction::new(a, b, k))
                .collect();
            ReactionNetwork::new((1..=n).map(|j| format!("S{j}")).collect(), reactions).ok()
        })
    })
}

/// A constructed Lyapunov function together with the network it belongs to.
pub struct Case {
    pub name: String,
    pub net: ReactionNetwork,
    pub f: LyapunovFunction,
}

pub fn cases() -> Vec<Case> {
    let mut out = Vec::new();
    let mut push = |name: &str, net: ReactionNetwork, f: LyapunovFunction| {
        out.push(Case {
            name: name.to_string(),
            net,
            f,
        });
    };
    push(
        "birth-death cbp",
        network("birth_death_cbp.crn"),
        lyapunov::build_pseudo_helmholtz(&[0.5], Some(&[2.0])).unwrap(),
    );
    let calvin = network("calvin.crn");
    for c in cbp::enumerate_cbp(&calvin, 64, 1000) {
        let d = c.scaling.to_f64();
        let star: Vec<f64> = d.iter().map(|d| 1.0 / d).collect();
        let f = lyapunov::build_pseudo_helmholtz(&star, Some(&d)).unwrap();
        push(
            &format!("calvin cbp d1={}", c.scaling.diag[0]),
            c.network,
            f,
        );
    }
    let chain = monomolecular_chain(&[1.0, 2.5], &[1.0, 0.5, 2.0]);
    push(
        "monomolecular chain",
        chain,
        lyapunov::build_pseudo_helmholtz(&[1.0, 0.5, 2.0], None).unwrap(),
    );
    let ex44 = compound("ex44.crnc");
    push(
        "ex44 cbp part",
        ex44.spec.cbp_part.clone(),
        lyapunov::build_pseudo_helmholtz(&[1.0, 4.0], Some(&[1.0, 0.5])).unwrap(),
    );
    let part = ex44.spec.parts[0].network.clone();
    push(
        "ex44 one-dimensional part",
        part.clone(),
        lyapunov::build_onedim(&part, &[1.0, 1.0]).unwrap(),
    );
    let rv = network("reaction_vector.crn");
    push(
        "reaction-vector balanced",
        rv.clone(),
        lyapunov::build_onedim(&rv, &[1.0, 1.0]).unwrap(),
    );
    let tc = two_complex(2, 3, 1.5, [0.8, 1.7]);
    push(
        "2S1 <-> 3S2",
        tc.clone(),
        lyapunov::build_onedim(&tc, &[0.8, 1.7]).unwrap(),
    );
    push(
        "ex44 compound",
        ex44.network.clone(),
        lyapunov::build_compound(&ex44.spec, &[1.0, 4.0, 1.0, 1.0]).unwrap(),
    );
    let ex57 = compound("ex57.crnc");
    push(
        "ex57 compound",
        ex57.network.clone(),
        lyapunov::build_compound(&ex57.spec, &[1.0, 1.0, 1.0]).unwrap(),
    );
    let ex58 = compound("ex58.crnc");
    push(
        "ex58 compound",
        ex58.network.clone(),
        lyapunov::build_compound(&ex58.spec, &[1.0, 4.0, 1.0]).unwrap(),
    );
    out
}
