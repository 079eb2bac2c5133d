//! Positive equilibria inside a compatibility class, complex / reaction-vector
//! balance predicates, and the exact root count for autocatalytic parts.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serialize;
use thiserror::Error;

use crate::compose::{validate_autoca, AutocaShape, ComposeError};
use crate::linalg;
use crate::model::{ModelError, ReactionNetwork, State};
use crate::poly::Poly;
use crate::sim;
use crate::structure;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 200;
const MAX_HALVINGS: usize = 60;
const RESTARTS: usize = 8;
const RELATIVE_FLUX_TOL: f64 = 1e-8;
/// Successive flow durations tried before giving up.
const FLOW_HORIZONS: [f64; 4] = [1.0, 10.0, 100.0, 1000.0];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BalanceError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("initial state must be strictly positive")]
    NonPositiveStart,
    #[error("tolerance must be positive")]
    BadTolerance,
    #[error("Newton did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        last: State,
        residual: f64,
        iterations: usize,
    },
    #[error("iterate left the positive orthant after {halvings} step halvings")]
    LeftOrthant { last: State, halvings: usize },
    #[error("singular Newton system")]
    Singular { last: State },
    #[error(transparent)]
    Compose(#[from] ComposeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Classification {
    pub is_complex_balanced: bool,
    pub is_reaction_vector_balanced: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumResult {
    pub point: State,
    /// `‖Γ R(x*)‖∞`.
    pub residual: f64,
    pub classification: Classification,
    /// Reaction vectors `η` with no reaction along `−η`; any of them makes
    /// reaction-vector balance fail at a positive state.
    pub unpaired_reaction_vectors: Vec<Vec<i64>>,
    pub class_anchor: State,
    pub iterations: usize,
}

/// Newton on `{independent rows of Γ R(x)} ∪ {wᵀ(x − x0)}`, starting at `x0`
/// and then at fixed log-space perturbations of it.
pub fn find_equilibrium(
    net: &ReactionNetwork,
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<EquilibriumResult, BalanceError> {
    let n = net.num_species();
    if x0.len() != n {
        return Err(ModelError::DimensionMismatch {
            expected: n,
            got: x0.len(),
        }
        .into());
    }
    if !linalg::is_positive_vec(x0) {
        return Err(BalanceError::NonPositiveStart);
    }
    if !(tol > 0.0) {
        return Err(BalanceError::BadTolerance);
    }
    let sys = System::new(net, x0);
    let mut first_err = None;
    for attempt in 0..=RESTARTS {
        let start: Vec<f64> = x0
            .iter()
            .enumerate()
            .map(|(j, &v)| v * perturbation(attempt, j).exp())
            .collect();
        match sys.newton(start, tol, max_iter) {
            Ok((point, iterations)) => return Ok(finish(net, point, x0, iterations, &sys)),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    // continuation along the flow, for starts outside every Newton basin
    let mut x = x0.to_vec();
    for t_end in FLOW_HORIZONS {
        let opts = sim::IntegratorOptions {
            max_steps: 200_000,
            ..sim::IntegratorOptions::for_horizon(t_end)
        };
        let Ok(traj) = sim::integrate_with(net, &x, t_end, &opts, None, &[]) else {
            break;
        };
        x = traj.last_state().to_vec();
        if !linalg::is_positive_vec(&x) {
            break;
        }
        if let Ok((point, iterations)) = sys.newton(x.clone(), tol, max_iter) {
            return Ok(finish(net, point, x0, iterations, &sys));
        }
    }
    Err(first_err.expect("at least one attempt"))
}

fn finish(
    net: &ReactionNetwork,
    point: State,
    x0: &[f64],
    iterations: usize,
    sys: &System,
) -> EquilibriumResult {
    let residual = linalg::max_abs(&sys.field(&point));
    let check = classification_tol(net, &point);
    let rv = reaction_vector_balance(net, &point, check);
    let classification = Classification {
        is_complex_balanced: is_complex_balanced_at(net, &point, check),
        is_reaction_vector_balanced: rv.balanced,
    };
    EquilibriumResult {
        point,
        residual,
        classification,
        unpaired_reaction_vectors: rv.unpaired,
        class_anchor: x0.to_vec(),
        iterations,
    }
}

/// Deterministic log-space offsets; attempt 0 is the unperturbed start.
fn perturbation(attempt: usize, j: usize) -> f64 {
    if attempt == 0 {
        return 0.0;
    }
    let mag = [0.5, 1.0, 2.0, 3.0][(attempt - 1) / 2];
    let sign = if (attempt + j).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    };
    sign * mag * if j % 3 == 2 { 0.5 } else { 1.0 }
}

/// Balance checks use a tolerance relative to the largest reaction rate.
fn classification_tol(net: &ReactionNetwork, x: &[f64]) -> f64 {
    let rates = net.compile().rates(x);
    1e-8 * (1.0 + linalg::max_abs(&rates))
}

struct System {
    ma: crate::model::MassAction,
    rows: Vec<usize>,
    conservation: Vec<Vec<f64>>,
    anchor: Vec<f64>,
    n: usize,
}

impl System {
    fn new(net: &ReactionNetwork, x0: &[f64]) -> Self {
        let rep = structure::analyze(net);
        let n = net.num_species();
        let rows = linalg::independent_rows(&rep.stoich_matrix, net.num_reactions());
        let conservation = rep
            .conservation_basis
            .iter()
            .map(|w| w.iter().map(|&v| v as f64).collect())
            .collect();
        System {
            ma: net.compile(),
            rows,
            conservation,
            anchor: x0.to_vec(),
            n,
        }
    }

    fn field(&self, x: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; self.n];
        self.ma.field_into(x, &mut f);
        f
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let f = self.field(x);
        let mut out: Vec<f64> = self.rows.iter().map(|&j| f[j]).collect();
        for w in &self.conservation {
            out.push(
                w.iter()
                    .zip(x.iter().zip(&self.anchor))
                    .map(|(wi, (a, b))| wi * (a - b))
                    .sum(),
            );
        }
        out
    }

    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let jac = self.ma.jacobian(x);
        let n = self.n;
        let mut m = DMatrix::zeros(n, n);
        for (r, &j) in self.rows.iter().enumerate() {
            for l in 0..n {
                m[(r, l)] = jac[j * n + l];
            }
        }
        for (c, w) in self.conservation.iter().enumerate() {
            for l in 0..n {
                m[(self.rows.len() + c, l)] = w[l];
            }
        }
        m
    }

    fn converged(&self, x: &[f64], tol: f64) -> bool {
        let f = self.field(x);
        let scale = 1.0 + linalg::max_abs(x);
        linalg::max_abs(&f) < tol
            && self.balanced_flux(x, &f)
            && linalg::max_abs(&self.residual(x)[self.rows.len()..]) < 1e-9 * scale
    }

    /// Net change of each species is small against its gross turnover, which
    /// rules out points near faces of the orthant where every rate vanishes.
    fn balanced_flux(&self, x: &[f64], f: &[f64]) -> bool {
        let mut gross = vec![0.0; self.n];
        for i in 0..self.ma.k.len() {
            let r = self.ma.rate(i, x);
            for &(j, d) in &self.ma.delta[i] {
                gross[j] += r * (d as f64).abs();
            }
        }
        f.iter()
            .zip(&gross)
            .all(|(f, g)| f.abs() <= RELATIVE_FLUX_TOL * g)
    }

    fn step(&self, x: &[f64]) -> Result<Vec<f64>, ()> {
        let r = DVector::from_vec(self.residual(x));
        let dx = self.jacobian(x).lu().solve(&(-r)).ok_or(())?;
        if dx.iter().any(|v| !v.is_finite()) {
            return Err(());
        }
        Ok(dx.iter().copied().collect())
    }

    fn newton(
        &self,
        mut x: Vec<f64>,
        tol: f64,
        max_iter: usize,
    ) -> Result<(Vec<f64>, usize), BalanceError> {
        let merit = |x: &[f64]| linalg::norm(&self.residual(x));
        let mut it = 0;
        while it < max_iter {
            if self.converged(&x, tol) {
                // extra polishing makes the result a numerical fixed point
                for _ in 0..3 {
                    let Ok(dx) = self.step(&x) else { break };
                    let cand: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
                    if linalg::is_positive_vec(&cand) && merit(&cand) <= merit(&x) {
                        x = cand;
                    } else {
                        break;
                    }
                }
                return Ok((x, it));
            }
            it += 1;
            let dx = self
                .step(&x)
                .map_err(|_| BalanceError::Singular { last: x.clone() })?;
            let mut lambda = 1.0;
            let mut halvings = 0;
            let mut cand: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + lambda * b).collect();
            while !linalg::is_positive_vec(&cand) {
                halvings += 1;
                if halvings > MAX_HALVINGS {
                    return Err(BalanceError::LeftOrthant {
                        last: x,
                        halvings: MAX_HALVINGS,
                    });
                }
                lambda *= 0.5;
                cand = x.iter().zip(&dx).map(|(a, b)| a + lambda * b).collect();
            }
            let m0 = merit(&x);
            let mut extra = 0;
            while merit(&cand) > m0 && extra < 30 {
                lambda *= 0.5;
                extra += 1;
                cand = x.iter().zip(&dx).map(|(a, b)| a + lambda * b).collect();
            }
            x = cand;
        }
        if self.converged(&x, tol) {
            return Ok((x, it));
        }
        let residual = linalg::max_abs(&self.field(&x));
        Err(BalanceError::NoConvergence {
            last: x,
            residual,
            iterations: max_iter,
        })
    }
}

/// Every complex has equal total inflow and outflow at `x`.
pub fn is_complex_balanced_at(net: &ReactionNetwork, x: &[f64], tol: f64) -> bool {
    let complexes = net.complexes();
    let ma = net.compile();
    let mut net_flow = vec![0.0; complexes.len()];
    let idx = |c| {
        complexes
            .iter()
            .position(|d| d == c)
            .expect("listed complex")
    };
    for (i, r) in net.reactions().iter().enumerate() {
        let rate = ma.rate(i, x);
        net_flow[idx(&r.reactant)] -= rate;
        net_flow[idx(&r.product)] += rate;
    }
    net_flow.iter().all(|v| v.abs() < tol || tol.is_infinite())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReactionVectorBalance {
    pub balanced: bool,
    /// Largest `|Σ_η R − Σ_{−η} R|` over paired directions.
    pub max_imbalance: f64,
    /// Directions `η` whose opposite `−η` has no reaction.
    pub unpaired: Vec<Vec<i64>>,
}

/// Pairs reactions by `η` and `−η`; an unpaired direction counts as balanced
/// only if its total rate vanishes.
pub fn reaction_vector_balance(
    net: &ReactionNetwork,
    x: &[f64],
    tol: f64,
) -> ReactionVectorBalance {
    let ma = net.compile();
    let mut groups: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    for (i, v) in net.reaction_vectors().into_iter().enumerate() {
        *groups.entry(v).or_insert(0.0) += ma.rate(i, x);
    }
    let mut max_imbalance: f64 = 0.0;
    let mut unpaired = Vec::new();
    let mut balanced = true;
    for (eta, &sum) in &groups {
        let neg: Vec<i64> = eta.iter().map(|v| -v).collect();
        match groups.get(&neg) {
            Some(&other) => {
                let d = (sum - other).abs();
                max_imbalance = max_imbalance.max(d);
                balanced &= d < tol || tol.is_infinite();
            }
            None => {
                unpaired.push(eta.clone());
                balanced &= sum.abs() < tol || tol.is_infinite();
            }
        }
    }
    ReactionVectorBalance {
        balanced,
        max_imbalance,
        unpaired,
    }
}

pub fn is_reaction_vector_balanced_at(net: &ReactionNetwork, x: &[f64], tol: f64) -> bool {
    reaction_vector_balance(net, x, tol).balanced
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AutocaRoots {
    pub count: usize,
    /// Ascending positive roots of `Σ k_{m,1} x* s^{m-1} − k_2 s`.
    pub roots: Vec<f64>,
}

/// Positive equilibria of the private species of a two-species autocatalytic
/// network with the shared species pinned at `x_p_star`.
pub fn autoca_equilibrium_count(
    subnet: &ReactionNetwork,
    x_p_star: f64,
) -> Result<AutocaRoots, BalanceError> {
    let shape = validate_autoca(subnet)?;
    Ok(autoca_roots(&shape, x_p_star))
}

pub fn autoca_roots(shape: &AutocaShape, x_p_star: f64) -> AutocaRoots {
    let xs = BigRational::from_float(x_p_star)
        .unwrap_or_else(|| BigRational::from_integer(BigInt::from(0)));
    let deg = shape.tau as usize;
    let mut coeffs = vec![BigRational::from_integer(BigInt::from(0)); deg.max(2)];
    for (&m, k) in &shape.rates_k_m1 {
        coeffs[m as usize - 1] += k.to_rational() * &xs;
    }
    coeffs[1] -= shape.rate_k2.to_rational();
    let p = Poly::new(coeffs);
    let roots = p.positive_roots();
    AutocaRoots {
        count: roots.len(),
        roots,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_network;

    #[test]
    fn birth_death_cbp_equilibrium() {
        let net = parse_network("2S1 -> S1 @ 4\n0 -> S1 @ 1").unwrap();
        let res = find_equilibrium(&net, &[2.0], DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!((res.point[0] - 0.5).abs() < 1e-12);
        assert!(!res.classification.is_complex_balanced);
    }

    #[test]
    fn reaction_vector_balanced_example() {
        let net =
            parse_network("S2 -> S1 @ 1\nS1 + S2 -> 2S2 @ 1\n2S1 -> 2S2 @ 1\n3S2 -> 2S1 + S2 @ 1")
                .unwrap();
        let res = find_equilibrium(&net, &[0.7, 1.3], DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(
            (res.point[0] - 1.0).abs() < 1e-10 && (res.point[1] - 1.0).abs() < 1e-10,
            "{:?}",
            res.point
        );
        assert!(res.classification.is_reaction_vector_balanced);
    }

    #[test]
    fn unpaired_direction_is_reported() {
        let net = parse_network("S1 -> S2 @ 1").unwrap();
        let rep = reaction_vector_balance(&net, &[1.0, 1.0], 1e-9);
        assert!(!rep.balanced);
        assert_eq!(rep.unpaired, vec![vec![-1, 1]]);
        assert!(is_complex_balanced_at(&net, &[1.0, 1.0], f64::INFINITY));
    }

    #[test]
    fn autoca_linear_and_cubic() {
        let lin = parse_network("S1 <-> S3 @ 3, 2").unwrap();
        let r = autoca_equilibrium_count(&lin, 2.0).unwrap();
        assert_eq!(r.roots, vec![3.0]);
        let cubic = parse_network(
            "S1 <-> S3 @ 8, 12\nS1 + S3 -> 2S3 @ 2\nS1 + 2S3 -> 3S3 @ 1\nS1 + 3S3 -> 4S3 @ 1",
        )
        .unwrap();
        let r = autoca_equilibrium_count(&cubic, 1.0).unwrap();
        assert_eq!(r.roots, vec![1.0, 2.0]);
    }

    #[test]
    fn rejects_bad_start() {
        let net = parse_network("S1 <-> S2 @ 1, 1").unwrap();
        assert!(matches!(
            find_equilibrium(&net, &[0.0, 1.0], 1e-10, 10),
            Err(BalanceError::NonPositiveStart)
        ));
    }

    #[test]
    fn vanishing_rates_near_a_face_are_not_an_equilibrium() {
        // every reaction needs S2, so Newton is drawn towards x2 = 0 from here
        let net =
            parse_network("S1 + 2S2 -> 2S2 @ 1/2\n2S2 -> 4S2 @ 1/2\n3S2 -> S1 + S2 @ 1/8").unwrap();
        let eq = find_equilibrium(&net, &[0.2, 0.2], DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(
            (eq.point[0] - 1.0).abs() < 1e-10 && (eq.point[1] - 4.0).abs() < 1e-10,
            "{:?}",
            eq.point
        );
    }
}
