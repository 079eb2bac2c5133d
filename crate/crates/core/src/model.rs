//! Core domain types: species, complexes, mass-action reactions and networks.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Dense concentration vector indexed by species.
pub type State = Vec<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("state has dimension {got}, network has {expected} species")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("negative concentration {value} for species `{species}`")]
    NegativeConcentration { species: String, value: f64 },
    #[error("reaction index {0} out of range")]
    NoSuchReaction(usize),
    #[error("network has no reactions")]
    Empty,
    #[error("duplicate species name `{0}`")]
    DuplicateSpecies(String),
    #[error("complex references species index {0} which is not declared")]
    UnknownSpecies(usize),
    #[error("self-loop reaction {0}: reactant equals product")]
    SelfLoop(usize),
    #[error("reaction {0} has a non-positive rate constant")]
    NonPositiveRate(usize),
    #[error("reaction {0} duplicates reaction {1}")]
    DuplicateReaction(usize, usize),
}

/// A species handle: position in the canonical order plus its name.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpeciesId {
    pub index: usize,
    pub name: String,
}

/// Non-negative integer combination of species. Zero coefficients are never stored,
/// so the zero complex is the empty map.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Complex {
    terms: BTreeMap<usize, u32>,
}

impl Complex {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_terms<I: IntoIterator<Item = (usize, u32)>>(terms: I) -> Self {
        let mut c = Self::zero();
        for (j, v) in terms {
            c.add(j, v);
        }
        c
    }

    pub fn from_dense(coeffs: &[u32]) -> Self {
        Self::from_terms(coeffs.iter().copied().enumerate())
    }

    /// Adds `v` copies of species `j` (no-op for `v == 0`).
    pub fn add(&mut self, j: usize, v: u32) {
        if v > 0 {
            *self.terms.entry(j).or_insert(0) += v;
        }
    }

    pub fn coeff(&self, j: usize) -> u32 {
        self.terms.get(&j).copied().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Iterates `(species index, coefficient)` in increasing species order.
    pub fn terms(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.terms.iter().map(|(&j, &v)| (j, v))
    }

    pub fn max_species(&self) -> Option<usize> {
        self.terms.keys().next_back().copied()
    }

    pub fn to_dense(&self, n: usize) -> Vec<u32> {
        let mut out = vec![0; n];
        for (j, v) in self.terms() {
            out[j] = v;
        }
        out
    }

    /// Re-indexes species through `map` (old index -> new index).
    pub fn remap(&self, map: impl Fn(usize) -> usize) -> Self {
        Self::from_terms(self.terms().map(|(j, v)| (map(j), v)))
    }

    /// `x^v` with the convention `0^0 = 1`.
    pub fn monomial(&self, x: &[f64]) -> f64 {
        self.terms()
            .fold(1.0, |acc, (j, v)| acc * x[j].powi(v as i32))
    }
}

/// Mass-action rate constant. Integers and `p/q` literals stay exact.
#[derive(Debug, Clone, PartialEq)]
pub enum Rate {
    Exact(BigRational),
    Float(f64),
}

impl Rate {
    pub fn exact(p: i64, q: i64) -> Self {
        Rate::Exact(BigRational::new(BigInt::from(p), BigInt::from(q)))
    }

    pub fn value(&self) -> f64 {
        match self {
            Rate::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
            Rate::Float(v) => *v,
        }
    }

    pub fn is_positive(&self) -> bool {
        match self {
            Rate::Exact(r) => r.is_positive(),
            Rate::Float(v) => v.is_finite() && *v > 0.0,
        }
    }

    /// Exact value of the rate; floats convert without rounding.
    pub fn to_rational(&self) -> BigRational {
        match self {
            Rate::Exact(r) => r.clone(),
            Rate::Float(v) => BigRational::from_float(*v).unwrap_or_else(BigRational::zero),
        }
    }

    /// Multiplies by an exact rational. Float rates stay float.
    pub fn scale(&self, factor: &BigRational) -> Rate {
        match self {
            Rate::Exact(r) => Rate::Exact(r * factor),
            Rate::Float(v) => Rate::Float(v * factor.to_f64().unwrap_or(f64::NAN)),
        }
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rate::Exact(r) if r.denom() == &BigInt::from(1) => write!(f, "{}", r.numer()),
            Rate::Exact(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            // Debug keeps a '.' or exponent so the text re-parses as a float.
            Rate::Float(v) => write!(f, "{v:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    pub reactant: Complex,
    pub product: Complex,
    pub rate: Rate,
}

impl Reaction {
    pub fn new(reactant: Complex, product: Complex, rate: Rate) -> Self {
        Self {
            reactant,
            product,
            rate,
        }
    }

    /// Reaction vector `v' - v` as a dense integer vector.
    pub fn delta(&self, n: usize) -> Vec<i64> {
        let mut d = vec![0i64; n];
        for (j, v) in self.product.terms() {
            d[j] += v as i64;
        }
        for (j, v) in self.reactant.terms() {
            d[j] -= v as i64;
        }
        d
    }
}

/// Validated mass-action system: ordered species and ordered reactions.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionNetwork {
    species: Vec<String>,
    reactions: Vec<Reaction>,
}

impl ReactionNetwork {
    pub fn new(species: Vec<String>, reactions: Vec<Reaction>) -> Result<Self, ModelError> {
        if reactions.is_empty() {
            return Err(ModelError::Empty);
        }
        let mut seen = HashSet::new();
        for s in &species {
            if !seen.insert(s.as_str()) {
                return Err(ModelError::DuplicateSpecies(s.clone()));
            }
        }
        let mut pairs: Vec<(&Complex, &Complex, usize)> = Vec::with_capacity(reactions.len());
        for (i, r) in reactions.iter().enumerate() {
            for c in [&r.reactant, &r.product] {
                if let Some(j) = c.max_species() {
                    if j >= species.len() {
                        return Err(ModelError::UnknownSpecies(j));
                    }
                }
            }
            if r.reactant == r.product {
                return Err(ModelError::SelfLoop(i));
            }
            if !r.rate.is_positive() {
                return Err(ModelError::NonPositiveRate(i));
            }
            pairs.push((&r.reactant, &r.product, i));
        }
        pairs.sort();
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                let (a, b) = (w[0].2.min(w[1].2), w[0].2.max(w[1].2));
                return Err(ModelError::DuplicateReaction(b, a));
            }
        }
        Ok(Self { species, reactions })
    }

    pub fn num_species(&self) -> usize {
        self.species.len()
    }

    pub fn num_reactions(&self) -> usize {
        self.reactions.len()
    }

    pub fn species_names(&self) -> &[String] {
        &self.species
    }

    pub fn species(&self) -> impl Iterator<Item = SpeciesId> + '_ {
        self.species
            .iter()
            .enumerate()
            .map(|(index, name)| SpeciesId {
                index,
                name: name.clone(),
            })
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s == name)
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    /// Stoichiometric matrix as columns `v'_i - v_i`.
    pub fn reaction_vectors(&self) -> Vec<Vec<i64>> {
        let n = self.num_species();
        self.reactions.iter().map(|r| r.delta(n)).collect()
    }

    /// Distinct complexes in first-appearance order (reactant before product).
    pub fn complexes(&self) -> Vec<Complex> {
        let mut out: Vec<Complex> = Vec::new();
        for r in &self.reactions {
            for c in [&r.reactant, &r.product] {
                if !out.contains(c) {
                    out.push(c.clone());
                }
            }
        }
        out
    }

    fn check_state(&self, x: &[f64]) -> Result<(), ModelError> {
        if x.len() != self.num_species() {
            return Err(ModelError::DimensionMismatch {
                expected: self.num_species(),
                got: x.len(),
            });
        }
        if let Some((j, &v)) = x.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(ModelError::NegativeConcentration {
                species: self.species[j].clone(),
                value: v,
            });
        }
        Ok(())
    }

    /// `R_i(x) = k_i x^{v_i}`.
    pub fn reaction_rate(&self, i: usize, x: &[f64]) -> Result<f64, ModelError> {
        self.check_state(x)?;
        let r = self.reactions.get(i).ok_or(ModelError::NoSuchReaction(i))?;
        Ok(r.rate.value() * r.reactant.monomial(x))
    }

    /// `dx/dt = Γ R(x)`.
    pub fn vector_field(&self, x: &[f64]) -> Result<State, ModelError> {
        self.check_state(x)?;
        let mut out = vec![0.0; x.len()];
        self.compile().field_into(x, &mut out);
        Ok(out)
    }

    /// Flattened form with float rates, for inner loops.
    pub fn compile(&self) -> MassAction {
        let n = self.num_species();
        let k = self.reactions.iter().map(|r| r.rate.value()).collect();
        let reactant = self
            .reactions
            .iter()
            .map(|r| r.reactant.terms().collect())
            .collect();
        let delta = self
            .reactions
            .iter()
            .map(|r| {
                r.delta(n)
                    .into_iter()
                    .enumerate()
                    .filter(|(_, d)| *d != 0)
                    .collect()
            })
            .collect();
        MassAction {
            n,
            k,
            reactant,
            delta,
        }
    }

    /// Permutes/renames species: new species list `names`, `map[old] = new`.
    pub fn reindexed(&self, names: Vec<String>, map: &[usize]) -> Result<Self, ModelError> {
        let reactions = self
            .reactions
            .iter()
            .map(|r| {
                Reaction::new(
                    r.reactant.remap(|j| map[j]),
                    r.product.remap(|j| map[j]),
                    r.rate.clone(),
                )
            })
            .collect();
        Self::new(names, reactions)
    }
}

/// Mass-action right-hand side with rates pre-converted to `f64`.
#[derive(Debug, Clone)]
pub struct MassAction {
    pub n: usize,
    pub k: Vec<f64>,
    pub reactant: Vec<Vec<(usize, u32)>>,
    pub delta: Vec<Vec<(usize, i64)>>,
}

impl MassAction {
    pub fn rate(&self, i: usize, x: &[f64]) -> f64 {
        self.reactant[i]
            .iter()
            .fold(self.k[i], |acc, &(j, v)| acc * x[j].powi(v as i32))
    }

    pub fn rates(&self, x: &[f64]) -> Vec<f64> {
        (0..self.k.len()).map(|i| self.rate(i, x)).collect()
    }

    pub fn field_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for i in 0..self.k.len() {
            let r = self.rate(i, x);
            for &(j, d) in &self.delta[i] {
                out[j] += r * d as f64;
            }
        }
    }

    /// Jacobian `∂(Γ R)/∂x`, row-major `n × n`.
    pub fn jacobian(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut jac = vec![0.0; n * n];
        for i in 0..self.k.len() {
            for &(l, vl) in &self.reactant[i] {
                // ∂R_i/∂x_l
                let mut g = self.k[i] * vl as f64;
                for &(j, v) in &self.reactant[i] {
                    let e = if j == l { v - 1 } else { v };
                    g *= x[j].powi(e as i32);
                }
                for &(j, d) in &self.delta[i] {
                    jac[j * n + l] += d as f64 * g;
                }
            }
        }
        jac
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn birth_death_cbp(k1: f64, k2: f64) -> ReactionNetwork {
        ReactionNetwork::new(
            s(&["S1"]),
            vec![
                Reaction::new(
                    Complex::from_terms([(0, 2)]),
                    Complex::from_terms([(0, 1)]),
                    Rate::Float(4.0 * k1),
                ),
                Reaction::new(
                    Complex::zero(),
                    Complex::from_terms([(0, 1)]),
                    Rate::Float(k2),
                ),
            ],
        )
        .unwrap()
    }

    #[test]
    fn zero_complex_rate_is_constant() {
        let net = birth_death_cbp(1.0, 7.0);
        assert_eq!(net.reaction_rate(1, &[0.0]).unwrap(), 7.0);
        assert_eq!(net.reaction_rate(1, &[123.0]).unwrap(), 7.0);
    }

    #[test]
    fn bimolecular_rate_matches_hand_value() {
        let net = birth_death_cbp(1.0, 1.0);
        assert_eq!(net.reaction_rate(0, &[0.5]).unwrap(), 1.0);
    }

    #[test]
    fn example_2_8_rates_agree_at_balanced_x1() {
        // S2 -> S1 @ k1, S1 + S2 -> 2S2 @ k2
        let (k1, k2) = (3.0, 1.5);
        let net = ReactionNetwork::new(
            s(&["S1", "S2"]),
            vec![
                Reaction::new(
                    Complex::from_terms([(1, 1)]),
                    Complex::from_terms([(0, 1)]),
                    Rate::Float(k1),
                ),
                Reaction::new(
                    Complex::from_terms([(0, 1), (1, 1)]),
                    Complex::from_terms([(1, 2)]),
                    Rate::Float(k2),
                ),
            ],
        )
        .unwrap();
        let x = [k1 / k2, 0.37];
        let a = net.reaction_rate(0, &x).unwrap();
        let b = net.reaction_rate(1, &x).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn source_birth_death_equilibrium_is_zero_of_field() {
        // 2S1 -> 0 @ k1, 0 -> 2S1 @ k2: -2 k1 x^2 + 2 k2 = 0 at x = sqrt(k2/k1)
        let (k1, k2) = (2.0, 0.5);
        let net = ReactionNetwork::new(
            s(&["S1"]),
            vec![
                Reaction::new(
                    Complex::from_terms([(0, 2)]),
                    Complex::zero(),
                    Rate::Float(k1),
                ),
                Reaction::new(
                    Complex::zero(),
                    Complex::from_terms([(0, 2)]),
                    Rate::Float(k2),
                ),
            ],
        )
        .unwrap();
        // bisection oracle on the 1-d field
        let (mut lo, mut hi) = (0.0f64, 10.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if net.vector_field(&[mid]).unwrap()[0] > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let closed = (k2 / k1).sqrt();
        assert!((lo - closed).abs() < 1e-14);
        assert!(net.vector_field(&[closed]).unwrap()[0].abs() < 1e-12);
    }

    #[test]
    fn inflow_only_field() {
        let net = ReactionNetwork::new(
            s(&["S1"]),
            vec![Reaction::new(
                Complex::zero(),
                Complex::from_terms([(0, 1)]),
                Rate::exact(1, 1),
            )],
        )
        .unwrap();
        assert_eq!(net.vector_field(&[0.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn errors_on_bad_state() {
        let net = birth_death_cbp(1.0, 1.0);
        assert!(matches!(
            net.vector_field(&[1.0, 2.0]),
            Err(ModelError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            net.reaction_rate(0, &[-1.0]),
            Err(ModelError::NegativeConcentration { .. })
        ));
    }

    #[test]
    fn rejects_self_loops_and_duplicates() {
        let a = Complex::from_terms([(0, 1)]);
        let err = ReactionNetwork::new(
            s(&["A"]),
            vec![Reaction::new(a.clone(), a.clone(), Rate::Float(1.0))],
        );
        assert_eq!(err, Err(ModelError::SelfLoop(0)));
        let r = Reaction::new(a.clone(), Complex::zero(), Rate::Float(1.0));
        let err = ReactionNetwork::new(s(&["A"]), vec![r.clone(), r]);
        assert_eq!(err, Err(ModelError::DuplicateReaction(1, 0)));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let net = birth_death_cbp(1.3, 0.7);
        let m = net.compile();
        let x = [0.9];
        let h = 1e-6;
        let mut fp = [0.0];
        let mut fm = [0.0];
        m.field_into(&[x[0] + h], &mut fp);
        m.field_into(&[x[0] - h], &mut fm);
        let fd = (fp[0] - fm[0]) / (2.0 * h);
        assert!((m.jacobian(&x)[0] - fd).abs() < 1e-6);
    }
}
