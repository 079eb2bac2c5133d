//! Stoichiometric analysis: Γ, S, conservation laws, linkage classes,
//! weak reversibility and deficiency.

use std::collections::VecDeque;

use serde::Serialize;

use crate::linalg;
use crate::model::{Complex, ModelError, ReactionNetwork};

#[derive(Debug, Clone, Serialize)]
pub struct StructureReport {
    pub num_species: usize,
    pub num_reactions: usize,
    /// `n × r`, column `i` is `v'_i - v_i`.
    pub stoich_matrix: Vec<Vec<i64>>,
    /// Orthonormal basis of the stoichiometric subspace.
    pub subspace_basis: Vec<Vec<f64>>,
    pub dim_s: usize,
    /// Primitive integer vectors `w` with `wᵀΓ = 0`.
    pub conservation_basis: Vec<Vec<i64>>,
    pub num_complexes: usize,
    pub num_linkage_classes: usize,
    pub weakly_reversible: bool,
    pub deficiency: i64,
}

pub fn analyze(net: &ReactionNetwork) -> StructureReport {
    let n = net.num_species();
    let cols = net.reaction_vectors();
    let r = cols.len();
    let gamma: Vec<Vec<i64>> = (0..n)
        .map(|j| cols.iter().map(|c| c[j]).collect())
        .collect();

    let dim_s = linalg::rank(&cols);
    // left null space of Γ = null space of Γᵀ (rows of Γᵀ are the reaction vectors)
    let conservation_basis = linalg::null_space(&cols, n);
    let float_cols: Vec<Vec<f64>> = cols
        .iter()
        .map(|c| c.iter().map(|&v| v as f64).collect())
        .collect();
    let subspace_basis = linalg::orthonormal_basis(&float_cols);
    debug_assert_eq!(subspace_basis.len(), dim_s);

    let complexes = net.complexes();
    let edges = complex_edges(net, &complexes);
    let num_linkage_classes = count_components(complexes.len(), &edges);
    let weakly_reversible = is_weakly_reversible(complexes.len(), &edges);
    let deficiency = complexes.len() as i64 - num_linkage_classes as i64 - dim_s as i64;

    StructureReport {
        num_species: n,
        num_reactions: r,
        stoich_matrix: gamma,
        subspace_basis,
        dim_s,
        conservation_basis,
        num_complexes: complexes.len(),
        num_linkage_classes,
        weakly_reversible,
        deficiency,
    }
}

fn complex_edges(net: &ReactionNetwork, complexes: &[Complex]) -> Vec<(usize, usize)> {
    let idx = |c: &Complex| {
        complexes
            .iter()
            .position(|d| d == c)
            .expect("complex listed")
    };
    net.reactions()
        .iter()
        .map(|r| (idx(&r.reactant), idx(&r.product)))
        .collect()
}

fn count_components(n: usize, edges: &[(usize, usize)]) -> usize {
    let mut uf = UnionFind::new(n);
    for &(a, b) in edges {
        uf.union(a, b);
    }
    (0..n).filter(|&i| uf.find(i) == i).count()
}

/// Every reaction `y -> y'` has a directed path back `y' -> y`.
fn is_weakly_reversible(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
    }
    edges.iter().all(|&(a, b)| reachable(&adj, b, a))
}

fn reachable(adj: &[Vec<usize>], from: usize, to: usize) -> bool {
    let mut seen = vec![false; adj.len()];
    let mut q = VecDeque::from([from]);
    seen[from] = true;
    while let Some(u) = q.pop_front() {
        if u == to {
            return true;
        }
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                q.push_back(v);
            }
        }
    }
    false
}

/// `x - x0 ∈ S` up to `tol` (Euclidean residual after projecting onto S).
pub fn same_compatibility_class(
    report: &StructureReport,
    x0: &[f64],
    x: &[f64],
    tol: f64,
) -> Result<bool, ModelError> {
    let n = report.num_species;
    for v in [x0, x] {
        if v.len() != n {
            return Err(ModelError::DimensionMismatch {
                expected: n,
                got: v.len(),
            });
        }
    }
    let diff: Vec<f64> = x.iter().zip(x0).map(|(a, b)| a - b).collect();
    Ok(linalg::residual_after_projection(&diff, &report.subspace_basis) < tol)
}

/// A subnetwork together with the global indices of its species.
#[derive(Debug, Clone)]
pub struct Part {
    pub network: ReactionNetwork,
    pub species: Vec<usize>,
    pub reactions: Vec<usize>,
}

/// Splits into connected components of the species–reaction graph.
/// Species that occur in no reaction are dropped.
pub fn decompose_with_layout(net: &ReactionNetwork) -> Vec<Part> {
    let n = net.num_species();
    let mut uf = UnionFind::new(n);
    let mut used = vec![false; n];
    for r in net.reactions() {
        let sp: Vec<usize> = r
            .reactant
            .terms()
            .chain(r.product.terms())
            .map(|(j, _)| j)
            .collect();
        for &j in &sp {
            used[j] = true;
            uf.union(sp[0], j);
        }
    }
    let mut roots: Vec<usize> = Vec::new();
    for j in 0..n {
        if used[j] && !roots.contains(&uf.find(j)) {
            roots.push(uf.find(j));
        }
    }
    roots
        .iter()
        .map(|&root| {
            let species: Vec<usize> = (0..n).filter(|&j| used[j] && uf.find(j) == root).collect();
            let reactions: Vec<usize> = net
                .reactions()
                .iter()
                .enumerate()
                .filter(|(_, r)| {
                    let j = r
                        .reactant
                        .terms()
                        .chain(r.product.terms())
                        .next()
                        .expect("non-empty reaction")
                        .0;
                    uf.find(j) == root
                })
                .map(|(i, _)| i)
                .collect();
            let mut map = vec![usize::MAX; n];
            for (local, &g) in species.iter().enumerate() {
                map[g] = local;
            }
            let names = species
                .iter()
                .map(|&g| net.species_names()[g].clone())
                .collect();
            let rs = reactions
                .iter()
                .map(|&i| {
                    let r = &net.reactions()[i];
                    crate::model::Reaction::new(
                        r.reactant.remap(|j| map[j]),
                        r.product.remap(|j| map[j]),
                        r.rate.clone(),
                    )
                })
                .collect();
            let network =
                ReactionNetwork::new(names, rs).expect("subnetwork of a valid network is valid");
            Part {
                network,
                species,
                reactions,
            }
        })
        .collect()
}

pub fn decompose_species_independent(net: &ReactionNetwork) -> Vec<ReactionNetwork> {
    decompose_with_layout(net)
        .into_iter()
        .map(|p| p.network)
        .collect()
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut c = i;
        while self.parent[c] != r {
            let next = self.parent[c];
            self.parent[c] = r;
            c = next;
        }
        r
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins, keeps component order stable
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_network;

    #[test]
    fn reversible_dimerisation() {
        let net = parse_network("2S1 <-> 0 @ 1, 1").unwrap();
        let rep = analyze(&net);
        assert_eq!(rep.stoich_matrix, vec![vec![-2, 2]]);
        assert_eq!(rep.dim_s, 1);
        assert_eq!(rep.num_complexes, 2);
        assert_eq!(rep.num_linkage_classes, 1);
        assert_eq!(rep.deficiency, 0);
        assert!(rep.weakly_reversible);
        assert!(rep.conservation_basis.is_empty());
    }

    #[test]
    fn conservation_vectors_are_exact() {
        let net = parse_network("A + B -> C @ 1\nC -> A + B @ 2\nC -> D @ 1").unwrap();
        let rep = analyze(&net);
        assert_eq!(rep.dim_s + rep.conservation_basis.len(), 4);
        for w in &rep.conservation_basis {
            for col in net.reaction_vectors() {
                assert_eq!(w.iter().zip(&col).map(|(a, b)| a * b).sum::<i64>(), 0);
            }
        }
        assert!(!rep.weakly_reversible);
    }

    #[test]
    fn compatibility_class_checks() {
        let net = parse_network("2X1 -> 2X2 @ 1\nX2 -> X1 @ 2").unwrap();
        let rep = analyze(&net);
        assert!(same_compatibility_class(&rep, &[1.0, 1.0], &[1.0, 1.0], 1e-12).unwrap());
        assert!(same_compatibility_class(&rep, &[1.0, 1.0], &[1.5, 0.5], 1e-12).unwrap());
        assert!(!same_compatibility_class(&rep, &[1.0, 1.0], &[2.0, 2.0], 1e-12).unwrap());
        assert!(same_compatibility_class(&rep, &[1.0], &[1.0, 1.0], 1e-12).is_err());
    }

    #[test]
    fn single_component_network_is_one_part() {
        let net = parse_network("A -> B @ 1\nB -> A + C @ 1").unwrap();
        let parts = decompose_species_independent(&net);
        assert_eq!(parts, vec![net]);
    }

    #[test]
    fn disjoint_networks_split() {
        let net = parse_network("A -> B @ 1\nC -> D @ 2\nB -> A @ 3").unwrap();
        let parts = decompose_with_layout(&net);
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].species, vec![0, 1]);
        assert_eq!(parts[0].reactions, vec![0, 2]);
        assert_eq!(parts[1].species, vec![2, 3]);
    }
}
