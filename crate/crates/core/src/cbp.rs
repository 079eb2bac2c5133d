//! Diagonal scalings of a network: `ṽ' = v + D⁻¹(v' − v)`, `k̃ = k ∏ d_j^{v_j}`.
//! Feasible `D` are enumerated per species and combined lexicographically.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::balance;
use crate::linalg;
use crate::model::{Complex, ModelError, Reaction, ReactionNetwork};
use crate::sim::{self, IntegratorOptions, SimError};

pub const DEFAULT_MAX_DENOMINATOR: u64 = 64;
pub const DEFAULT_LIMIT: usize = 1000;
/// Upper bound on scalings tried by [`recover_scaling`].
const RECOVER_BUDGET: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CbpError {
    #[error("scaling has {got} entries for {expected} species")]
    Dimension { expected: usize, got: usize },
    #[error("d_{species} must be positive")]
    NonPositive { species: usize },
    #[error("the identity scaling does not produce a new network")]
    Identity,
    #[error("reaction {reaction}, species `{species}`: {reason}")]
    Infeasible {
        reaction: usize,
        species: String,
        reason: String,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Positive diagonal `D ≠ I`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ScalingMatrix {
    pub diag: Vec<BigRational>,
}

impl ScalingMatrix {
    pub fn new(diag: Vec<BigRational>) -> Result<Self, CbpError> {
        let s = ScalingMatrix { diag };
        s.check()?;
        Ok(s)
    }

    fn check(&self) -> Result<(), CbpError> {
        if let Some(j) = self.diag.iter().position(|d| !d.is_positive()) {
            return Err(CbpError::NonPositive { species: j });
        }
        if self.is_identity() {
            return Err(CbpError::Identity);
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.diag.iter().all(One::is_one)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.diag.iter().map(linalg::ratio_to_f64).collect()
    }

    /// `p/q` strings.
    pub fn to_strings(&self) -> Vec<String> {
        self.diag.iter().map(ToString::to_string).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CbpResult {
    pub scaling: ScalingMatrix,
    pub network: ReactionNetwork,
    pub source: ReactionNetwork,
}

/// Admissible values of one `d_j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "values")]
pub enum Candidates {
    /// No reaction changes the species; every `d_j > 0` works and enumeration uses 1.
    Unconstrained,
    /// Ascending, always containing 1.
    Values(#[serde(serialize_with = "ser_rationals")] Vec<BigRational>),
}

fn ser_rationals<S: serde::Serializer>(v: &[BigRational], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(ToString::to_string))
}

impl Candidates {
    fn enumeration_values(&self) -> Vec<BigRational> {
        match self {
            Candidates::Unconstrained => vec![BigRational::one()],
            Candidates::Values(v) => v.clone(),
        }
    }
}

fn rat(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// `F_j = { g/t : t ≥ 1 }` where `g` is the gcd of the nonzero `|v'_ji − v_ji|`,
/// cut by `v_ji + (v'_ji − v_ji) t/g ≥ 0` on decreasing reactions and by the
/// reduced denominator `≤ max_denominator`.
pub fn feasible_scalings(net: &ReactionNetwork, max_denominator: u64) -> Vec<Candidates> {
    let n = net.num_species();
    let max_den = max_denominator.max(1);
    (0..n)
        .map(|j| {
            let pairs: Vec<(i64, i64)> = net
                .reactions()
                .iter()
                .map(|r| {
                    (
                        r.reactant.coeff(j) as i64,
                        r.product.coeff(j) as i64 - r.reactant.coeff(j) as i64,
                    )
                })
                .filter(|&(_, d)| d != 0)
                .collect();
            if pairs.is_empty() {
                return Candidates::Unconstrained;
            }
            let g = pairs.iter().fold(0i64, |acc, &(_, d)| acc.gcd(&d));
            let mut t_max = g.saturating_mul(max_den as i64);
            for &(v, d) in &pairs {
                if d < 0 {
                    t_max = t_max.min(g * v / -d);
                }
            }
            let mut vals: Vec<BigRational> = (1..=t_max)
                .filter(|&t| (t / t.gcd(&g)) as u64 <= max_den)
                .map(|t| BigRational::new(BigInt::from(g), BigInt::from(t)))
                .collect();
            vals.sort();
            vals.dedup();
            Candidates::Values(vals)
        })
        .collect()
}

/// Applies `D` to every reaction.
pub fn apply_scaling(net: &ReactionNetwork, d: &ScalingMatrix) -> Result<CbpResult, CbpError> {
    let n = net.num_species();
    if d.diag.len() != n {
        return Err(CbpError::Dimension {
            expected: n,
            got: d.diag.len(),
        });
    }
    d.check()?;
    let names = net.species_names();
    let mut reactions = Vec::with_capacity(net.num_reactions());
    for (i, r) in net.reactions().iter().enumerate() {
        let mut product = Complex::zero();
        let mut factor = BigRational::one();
        for j in 0..n {
            let v = r.reactant.coeff(j) as i64;
            let delta = r.product.coeff(j) as i64 - v;
            let new = rat(v) + rat(delta) / &d.diag[j];
            let infeasible = |reason: String| CbpError::Infeasible {
                reaction: i,
                species: names[j].clone(),
                reason,
            };
            if !new.is_integer() {
                return Err(infeasible(format!(
                    "transformed coefficient {new} is not an integer"
                )));
            }
            if new.is_negative() {
                return Err(infeasible(format!(
                    "transformed coefficient {new} is negative"
                )));
            }
            let c = new
                .to_integer()
                .to_u32()
                .ok_or_else(|| infeasible("coefficient overflow".into()))?;
            product.add(j, c);
            factor *= num_traits::pow(d.diag[j].clone(), v as usize);
        }
        if product == r.reactant {
            return Err(CbpError::Infeasible {
                reaction: i,
                species: String::new(),
                reason: "transformed reaction is a self-loop".into(),
            });
        }
        reactions.push(Reaction::new(
            r.reactant.clone(),
            product,
            r.rate.scale(&factor),
        ));
    }
    let network = ReactionNetwork::new(names.to_vec(), reactions)?;
    Ok(CbpResult {
        scaling: d.clone(),
        network,
        source: net.clone(),
    })
}

/// All non-identity combinations of [`feasible_scalings`] in lexicographic
/// order (species 0 most significant), at most `limit` of them.
pub fn enumerate_cbp(net: &ReactionNetwork, max_denominator: u64, limit: usize) -> Vec<CbpResult> {
    let sets: Vec<Vec<BigRational>> = feasible_scalings(net, max_denominator)
        .iter()
        .map(Candidates::enumeration_values)
        .collect();
    if limit == 0 || sets.iter().any(Vec::is_empty) {
        return Vec::new();
    }
    let mut picks: Vec<Vec<BigRational>> = Vec::new();
    let mut idx = vec![0usize; sets.len()];
    loop {
        let diag: Vec<BigRational> = idx.iter().zip(&sets).map(|(&k, s)| s[k].clone()).collect();
        if !diag.iter().all(One::is_one) {
            picks.push(diag);
        }
        if picks.len() >= limit || !advance(&mut idx, &sets) {
            break;
        }
    }
    picks
        .into_par_iter()
        .filter_map(|diag| apply_scaling(net, &ScalingMatrix { diag }).ok())
        .collect()
}

/// Integrates the source from `x0` and the CBP network from `D⁻¹x0` and
/// returns `max_t ‖x̃(t) − D⁻¹x(t)‖∞` over a uniform grid on `[0, t_end]`.
pub fn verify_conjugacy(
    source: &ReactionNetwork,
    cbp: &CbpResult,
    x0: &[f64],
    t_end: f64,
) -> Result<f64, CbpError> {
    cbp.scaling.check()?;
    let n = source.num_species();
    if x0.len() != n || cbp.scaling.diag.len() != n {
        return Err(CbpError::Dimension {
            expected: n,
            got: x0.len(),
        });
    }
    let d = cbp.scaling.to_f64();
    let y0: Vec<f64> = x0.iter().zip(&d).map(|(x, d)| x / d).collect();
    let grid = sim::uniform_grid(t_end, sim::REPORT_SAMPLES);
    let opts = IntegratorOptions {
        rel_tol: 1e-11,
        abs_tol: 1e-13,
        ..IntegratorOptions::for_horizon(t_end)
    };
    let (a, b) = rayon::join(
        || sim::integrate_with(source, x0, t_end, &opts, None, &grid),
        || sim::integrate_with(&cbp.network, &y0, t_end, &opts, None, &grid),
    );
    let (a, b) = (a?, b?);
    let mut dev: f64 = 0.0;
    for &t in &grid {
        let xa = a.at(t);
        let xb = b.at(t);
        for j in 0..n {
            dev = dev.max((xb[j] - xa[j] / d[j]).abs());
        }
    }
    Ok(dev)
}

/// Given a network believed to be CBP and one of its positive equilibria
/// `x̃*`, searches for weights `d` (identity allowed) whose inverse transform is
/// a valid network that is complex balanced at `D x̃*`. Returns the first
/// match in lexicographic order together with that source network.
pub fn recover_scaling(
    cbp_net: &ReactionNetwork,
    x_star: &[f64],
    max_denominator: u64,
) -> Option<(Vec<BigRational>, ReactionNetwork)> {
    let n = cbp_net.num_species();
    let max_den = max_denominator.max(1) as i64;
    let mut sets = Vec::with_capacity(n);
    for j in 0..n {
        let pairs: Vec<(i64, i64)> = cbp_net
            .reactions()
            .iter()
            .map(|r| {
                (
                    r.reactant.coeff(j) as i64,
                    r.product.coeff(j) as i64 - r.reactant.coeff(j) as i64,
                )
            })
            .filter(|&(_, d)| d != 0)
            .collect();
        if pairs.is_empty() {
            sets.push(vec![BigRational::one()]);
            continue;
        }
        // d·δ̃ integral for all reactions ⇔ d = s/g̃
        let g = pairs.iter().fold(0i64, |acc, &(_, d)| acc.gcd(&d));
        let mut s_max = g * max_den;
        for &(v, d) in &pairs {
            if d < 0 {
                s_max = s_max.min(g * v / -d);
            }
        }
        sets.push(
            (1..=s_max)
                .map(|s| BigRational::new(BigInt::from(s), BigInt::from(g)))
                .collect(),
        );
    }
    let total = sets
        .iter()
        .try_fold(1usize, |acc, s| acc.checked_mul(s.len()))?;
    if total == 0 || total > RECOVER_BUDGET {
        return None;
    }
    let mut idx = vec![0usize; n];
    for _ in 0..total {
        let diag: Vec<BigRational> = idx.iter().zip(&sets).map(|(&k, s)| s[k].clone()).collect();
        if let Some(src) = inverse_transform(cbp_net, &diag) {
            let x: Vec<f64> = x_star
                .iter()
                .zip(&diag)
                .map(|(x, d)| x * linalg::ratio_to_f64(d))
                .collect();
            let rates = src.compile().rates(&x);
            let tol = 1e-8 * (1.0 + linalg::max_abs(&rates));
            if balance::is_complex_balanced_at(&src, &x, tol) {
                return Some((diag, src));
            }
        }
        advance(&mut idx, &sets);
    }
    None
}

/// Odometer step, last position fastest; false once it wraps around.
fn advance<T>(idx: &mut [usize], sets: &[Vec<T>]) -> bool {
    for pos in (0..idx.len()).rev() {
        idx[pos] += 1;
        if idx[pos] < sets[pos].len() {
            return true;
        }
        idx[pos] = 0;
    }
    false
}

/// `v' = v + D(ṽ' − v)`, `k = k̃ / ∏ d_j^{v_j}`.
fn inverse_transform(net: &ReactionNetwork, diag: &[BigRational]) -> Option<ReactionNetwork> {
    let n = net.num_species();
    let mut reactions = Vec::new();
    for r in net.reactions() {
        let mut product = Complex::zero();
        let mut factor = BigRational::one();
        for (j, dj) in diag.iter().enumerate().take(n) {
            let v = r.reactant.coeff(j) as i64;
            let new = rat(v) + rat(r.product.coeff(j) as i64 - v) * dj;
            if !new.is_integer() || new.is_negative() {
                return None;
            }
            product.add(j, new.to_integer().to_u32()?);
            factor *= num_traits::pow(dj.clone(), v as usize);
        }
        reactions.push(Reaction::new(
            r.reactant.clone(),
            product,
            r.rate.scale(&factor.recip()),
        ));
    }
    ReactionNetwork::new(net.species_names().to_vec(), reactions).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Rate;
    use crate::parser::parse_network;

    fn r(p: i64, q: i64) -> BigRational {
        BigRational::new(BigInt::from(p), BigInt::from(q))
    }

    #[test]
    fn dimerisation_has_single_scaling() {
        let net = parse_network("2S1 <-> 0 @ 1, 1").unwrap();
        assert_eq!(
            feasible_scalings(&net, 64),
            vec![Candidates::Values(vec![r(1, 1), r(2, 1)])]
        );
        let out = enumerate_cbp(&net, 64, 1000);
        assert_eq!(out.len(), 1);
        let text = crate::parser::serialize_network(&out[0].network);
        assert_eq!(text, "species S1\n2S1 -> S1 @ 4\n0 -> S1 @ 1\n");
    }

    #[test]
    fn single_step_conversion_is_rigid() {
        let net = parse_network("S1 -> S2 @ 1").unwrap();
        let f = feasible_scalings(&net, 64);
        assert_eq!(f[0], Candidates::Values(vec![r(1, 1)]));
        // only the produced species can be rescaled
        let out = enumerate_cbp(&net, 64, 1000);
        assert_eq!(out.len(), 63);
        assert!(out.iter().all(|c| c.scaling.diag[0].is_one()));
    }

    #[test]
    fn untouched_species_is_unconstrained() {
        let net = parse_network("A + C -> B + C @ 1").unwrap();
        let c = net.species_index("C").unwrap();
        assert_eq!(feasible_scalings(&net, 8)[c], Candidates::Unconstrained);
    }

    #[test]
    fn rejects_identity_and_infeasible() {
        let net = parse_network("S1 -> S2 @ 1").unwrap();
        assert_eq!(
            ScalingMatrix::new(vec![r(1, 1), r(1, 1)]),
            Err(CbpError::Identity)
        );
        let d = ScalingMatrix::new(vec![r(2, 1), r(1, 1)]).unwrap();
        assert!(matches!(
            apply_scaling(&net, &d),
            Err(CbpError::Infeasible { reaction: 0, .. })
        ));
    }

    #[test]
    fn rates_scale_exactly() {
        let net = parse_network("2S1 <-> 0 @ 3/7, 5").unwrap();
        let d = ScalingMatrix::new(vec![r(2, 1)]).unwrap();
        let res = apply_scaling(&net, &d).unwrap();
        assert_eq!(res.network.reactions()[0].rate, Rate::Exact(r(12, 7)));
        assert_eq!(res.network.reactions()[1].rate, Rate::Exact(r(5, 1)));
    }

    #[test]
    fn recovers_birth_death_source() {
        let net = parse_network("2S1 -> S1 @ 4\n0 -> S1 @ 1").unwrap();
        let (d, src) = recover_scaling(&net, &[0.5], 64).unwrap();
        assert_eq!(d, vec![r(2, 1)]);
        assert_eq!(src, parse_network("2S1 -> 0 @ 1\n0 -> 2S1 @ 1").unwrap());
    }
}
