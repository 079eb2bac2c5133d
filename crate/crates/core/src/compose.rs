//! Compound networks: a CBP part joined either with species-disjoint
//! one-dimensional parts, or with two-species autocatalytic parts that each
//! share one species with it. Also owns the `.crnc` section format.

use std::collections::{BTreeMap, HashSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::model::{ModelError, Rate, Reaction, ReactionNetwork, SpeciesId};
use crate::parser::{parse_network_at, ParseDiagnostic};
use crate::structure;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComposeError {
    #[error("reaction {reaction} `{text}`: {clause}")]
    Shape {
        reaction: usize,
        text: String,
        clause: String,
    },
    #[error("missing {0}; both single-molecule conversions are required")]
    MissingPair(String),
    #[error("autocatalytic part must have exactly 2 species, found {0}")]
    SpeciesCount(usize),
    #[error("part {part} has stoichiometric dimension {dim}, expected 1")]
    Dimension { part: usize, dim: usize },
    #[error("species `{0}` appears in more than one part")]
    Collision(String),
    #[error("CBP species `{0}` is shared by more than one autocatalytic part")]
    DuplicateShared(String),
    #[error("{parts} autocatalytic parts but the CBP part has only {n0} species")]
    TooManyParts { parts: usize, n0: usize },
    #[error("no CBP species with index {0}")]
    UnknownShared(usize),
    #[error("weights: {0}")]
    Weights(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PartKind {
    Sub1,
    Autoca,
}

/// Shape data of a two-species autocatalytic network:
/// `S_i + (m-1) S_j -> m S_j @ k_{m,1}` for `m` in the index set, and `S_j -> S_i @ k_2`.
#[derive(Debug, Clone, PartialEq)]
pub struct AutocaShape {
    /// Local index of `S_i`, the species consumed by every forward reaction.
    pub shared: usize,
    /// Local index of `S_j`.
    pub private: usize,
    /// Ascending; always starts with 1.
    pub index_set: Vec<u32>,
    pub tau: u32,
    pub rates_k_m1: BTreeMap<u32, Rate>,
    pub rate_k2: Rate,
    pub mass_conserved: bool,
}

impl AutocaShape {
    /// `Σ_m k_{m,1} s^{m-1}`.
    pub fn forward_poly(&self, s: f64) -> f64 {
        self.rates_k_m1
            .iter()
            .map(|(&m, k)| k.value() * s.powi(m as i32 - 1))
            .sum()
    }

    /// `Σ_m (m-1) k_{m,1} s^{m-2}`.
    pub fn forward_poly_derivative(&self, s: f64) -> f64 {
        self.rates_k_m1
            .iter()
            .filter(|(&m, _)| m > 1)
            .map(|(&m, k)| (m - 1) as f64 * k.value() * s.powi(m as i32 - 2))
            .sum()
    }

    /// `Σ_m (2-m) k_{m,1} s^{m-1}`; positive at the private equilibrium value is
    /// the stability side-condition.
    pub fn stability_sum(&self, s: f64) -> f64 {
        self.rates_k_m1
            .iter()
            .map(|(&m, k)| (2.0 - m as f64) * k.value() * s.powi(m as i32 - 1))
            .sum()
    }

    pub fn has_high_order(&self) -> bool {
        self.tau > 2
    }
}

/// Checks the two-species autocatalytic shape, trying both species as the
/// consumed one (the first species wins when both fit).
pub fn validate_autoca(net: &ReactionNetwork) -> Result<AutocaShape, ComposeError> {
    match validate_autoca_with(net, 0) {
        Ok(s) => Ok(s),
        Err(e) => validate_autoca_with(net, 1).map_err(|_| e),
    }
}

/// Like [`validate_autoca`] with the consumed species fixed.
pub fn validate_autoca_with(
    net: &ReactionNetwork,
    shared: usize,
) -> Result<AutocaShape, ComposeError> {
    if net.num_species() != 2 {
        return Err(ComposeError::SpeciesCount(net.num_species()));
    }
    let (i, j) = (shared, 1 - shared);
    let names = net.species_names();
    let text = |r: &Reaction| crate::parser::format_reaction(r, names);
    let mut rates_k_m1 = BTreeMap::new();
    let mut rate_k2 = None;
    for (idx, r) in net.reactions().iter().enumerate() {
        let d = r.delta(2);
        let shape_err = |clause: &str| ComposeError::Shape {
            reaction: idx,
            text: text(r),
            clause: clause.to_string(),
        };
        if d[i] == -1 && d[j] == 1 {
            let m = r.product.coeff(j);
            if r.reactant.coeff(i) != 1 || r.product.coeff(i) != 0 || r.reactant.coeff(j) + 1 != m {
                return Err(shape_err(&format!(
                    "forward reactions must read {si} + (m-1){sj} -> m{sj} (net consumption of one {si})",
                    si = names[i],
                    sj = names[j]
                )));
            }
            rates_k_m1.insert(m, r.rate.clone());
        } else if d[i] == 1 && d[j] == -1 {
            if r.reactant.coeff(j) != 1
                || r.reactant.coeff(i) != 0
                || r.product.coeff(i) != 1
                || r.product.coeff(j) != 0
            {
                return Err(shape_err(&format!(
                    "mass exchange back to {} must be the single-molecule reaction {} -> {}",
                    names[i], names[j], names[i]
                )));
            }
            rate_k2 = Some(r.rate.clone());
        } else {
            return Err(shape_err(&format!(
                "every reaction must consume exactly one {} and produce one {} or the reverse",
                names[i], names[j]
            )));
        }
    }
    let missing = |what: &str| ComposeError::MissingPair(what.to_string());
    if !rates_k_m1.contains_key(&1) {
        return Err(missing(&format!("{} -> {}", names[i], names[j])));
    }
    let rate_k2 = rate_k2.ok_or_else(|| missing(&format!("{} -> {}", names[j], names[i])))?;
    let mass_conserved = net.reaction_vectors().iter().all(|v| v[0] + v[1] == 0);
    let index_set: Vec<u32> = rates_k_m1.keys().copied().collect();
    let tau = *index_set.last().expect("contains 1");
    Ok(AutocaShape {
        shared: i,
        private: j,
        index_set,
        tau,
        rates_k_m1,
        rate_k2,
        mass_conserved,
    })
}

#[derive(Debug, Clone)]
pub struct CompoundPart {
    pub kind: PartKind,
    pub network: ReactionNetwork,
    /// Global species identified with the part's consumed species (autocatalytic parts).
    pub shared_species: Option<SpeciesId>,
    /// `layout[local] = global`.
    pub layout: Vec<usize>,
    /// Indices of the part's reactions in the global network.
    pub reactions: std::ops::Range<usize>,
    pub shape: Option<AutocaShape>,
}

#[derive(Debug, Clone)]
pub struct CompoundSpec {
    pub kind: PartKind,
    pub cbp_part: ReactionNetwork,
    pub cbp_layout: Vec<usize>,
    pub cbp_reactions: std::ops::Range<usize>,
    /// Scaling weights of the CBP part in its local species order, when known.
    pub cbp_weights: Option<Vec<BigRational>>,
    pub parts: Vec<CompoundPart>,
    pub num_species: usize,
}

impl CompoundSpec {
    /// Weights in global coordinates on the CBP species (`None` elsewhere).
    pub fn global_weights(&self) -> Option<Vec<Option<f64>>> {
        let w = self.cbp_weights.as_ref()?;
        let mut out = vec![None; self.num_species];
        for (local, &g) in self.cbp_layout.iter().enumerate() {
            out[g] = Some(crate::linalg::ratio_to_f64(&w[local]));
        }
        Some(out)
    }

    pub fn with_weights(mut self, weights: Vec<BigRational>) -> Result<Self, ComposeError> {
        if weights.len() != self.cbp_part.num_species() {
            return Err(ComposeError::Weights(format!(
                "{} weights for {} CBP species",
                weights.len(),
                self.cbp_part.num_species()
            )));
        }
        if weights.iter().any(|w| !w.is_positive()) {
            return Err(ComposeError::Weights("weights must be positive".into()));
        }
        if self.kind == PartKind::Autoca {
            for p in &self.parts {
                let g = p
                    .shared_species
                    .as_ref()
                    .expect("autoca part has a shared species")
                    .index;
                let local = self
                    .cbp_layout
                    .iter()
                    .position(|&x| x == g)
                    .expect("shared species is a CBP species");
                if weights[local] != BigRational::from_integer(BigInt::from(1)) {
                    return Err(ComposeError::Weights(format!(
                        "shared species `{}` must have weight 1",
                        self.cbp_part.species_names()[local]
                    )));
                }
            }
        }
        self.cbp_weights = Some(weights);
        Ok(self)
    }

    /// Restriction of a global state to the CBP part, in its local order.
    pub fn project_cbp(&self, x: &[f64]) -> Vec<f64> {
        self.cbp_layout.iter().map(|&g| x[g]).collect()
    }

    pub fn project_part(&self, p: usize, x: &[f64]) -> Vec<f64> {
        self.parts[p].layout.iter().map(|&g| x[g]).collect()
    }
}

fn embed(r: &Reaction, layout: &[usize]) -> Reaction {
    Reaction::new(
        r.reactant.remap(|j| layout[j]),
        r.product.remap(|j| layout[j]),
        r.rate.clone(),
    )
}

/// Species-disjoint union of a CBP network with one-dimensional parts.
pub fn compose_sub1(
    cbp: &ReactionNetwork,
    parts: &[ReactionNetwork],
) -> Result<(CompoundSpec, ReactionNetwork), ComposeError> {
    for (p, part) in parts.iter().enumerate() {
        let dim = structure::analyze(part).dim_s;
        if dim != 1 {
            return Err(ComposeError::Dimension { part: p + 1, dim });
        }
    }
    let mut names: Vec<String> = Vec::new();
    let mut seen = HashSet::new();
    let mut layouts = Vec::new();
    for net in std::iter::once(cbp).chain(parts) {
        let mut layout = Vec::new();
        for name in net.species_names() {
            if !seen.insert(name.clone()) {
                return Err(ComposeError::Collision(name.clone()));
            }
            layout.push(names.len());
            names.push(name.clone());
        }
        layouts.push(layout);
    }
    let mut reactions = Vec::new();
    let mut ranges = Vec::new();
    for (net, layout) in std::iter::once(cbp).chain(parts).zip(&layouts) {
        let start = reactions.len();
        reactions.extend(net.reactions().iter().map(|r| embed(r, layout)));
        ranges.push(start..reactions.len());
    }
    let global = ReactionNetwork::new(names.clone(), reactions)?;
    let spec = CompoundSpec {
        kind: PartKind::Sub1,
        cbp_part: cbp.clone(),
        cbp_layout: layouts[0].clone(),
        cbp_reactions: ranges[0].clone(),
        cbp_weights: None,
        parts: parts
            .iter()
            .enumerate()
            .map(|(p, net)| CompoundPart {
                kind: PartKind::Sub1,
                network: net.clone(),
                shared_species: None,
                layout: layouts[p + 1].clone(),
                reactions: ranges[p + 1].clone(),
                shape: None,
            })
            .collect(),
        num_species: names.len(),
    };
    Ok((spec, global))
}

/// Shared-species union. Each binding pairs a CBP species index with an
/// autocatalytic network whose first species is identified with it. Shared
/// species move to global indices `0..ℓ` (binding order), the remaining CBP
/// species follow in their own order, and private species come last.
pub fn compose_autoca(
    cbp: &ReactionNetwork,
    bindings: &[(usize, ReactionNetwork)],
) -> Result<(CompoundSpec, ReactionNetwork), ComposeError> {
    let n0 = cbp.num_species();
    let ell = bindings.len();
    if ell > n0 {
        return Err(ComposeError::TooManyParts { parts: ell, n0 });
    }
    let mut shapes = Vec::new();
    let mut shared_seen = HashSet::new();
    for (s, net) in bindings {
        if *s >= n0 {
            return Err(ComposeError::UnknownShared(*s));
        }
        if !shared_seen.insert(*s) {
            return Err(ComposeError::DuplicateShared(
                cbp.species_names()[*s].clone(),
            ));
        }
        shapes.push(validate_autoca_with(net, 0)?);
    }
    let mut cbp_layout = vec![usize::MAX; n0];
    for (p, (s, _)) in bindings.iter().enumerate() {
        cbp_layout[*s] = p;
    }
    let mut next = ell;
    for slot in cbp_layout.iter_mut().filter(|g| **g == usize::MAX) {
        *slot = next;
        next += 1;
    }
    let mut names = vec![String::new(); n0 + ell];
    for (local, &g) in cbp_layout.iter().enumerate() {
        names[g] = cbp.species_names()[local].clone();
    }
    let mut seen: HashSet<String> = cbp.species_names().iter().cloned().collect();
    for (p, (_, net)) in bindings.iter().enumerate() {
        let private = net.species_names()[1].clone();
        if !seen.insert(private.clone()) {
            return Err(ComposeError::Collision(private));
        }
        names[n0 + p] = private;
    }
    let mut reactions: Vec<Reaction> = cbp
        .reactions()
        .iter()
        .map(|r| embed(r, &cbp_layout))
        .collect();
    let cbp_reactions = 0..reactions.len();
    let mut parts = Vec::new();
    for (p, ((s, net), shape)) in bindings.iter().zip(shapes).enumerate() {
        let layout = vec![cbp_layout[*s], n0 + p];
        let start = reactions.len();
        reactions.extend(net.reactions().iter().map(|r| embed(r, &layout)));
        parts.push(CompoundPart {
            kind: PartKind::Autoca,
            network: net.clone(),
            shared_species: Some(SpeciesId {
                index: cbp_layout[*s],
                name: names[cbp_layout[*s]].clone(),
            }),
            layout,
            reactions: start..reactions.len(),
            shape: Some(shape),
        });
    }
    let global = ReactionNetwork::new(names, reactions)?;
    let spec = CompoundSpec {
        kind: PartKind::Autoca,
        cbp_part: cbp.clone(),
        cbp_layout,
        cbp_reactions,
        cbp_weights: None,
        parts,
        num_species: n0 + ell,
    };
    Ok((spec, global))
}

#[derive(Debug, Clone, Serialize)]
pub struct PartConditions {
    pub part: usize,
    pub tau: u32,
    pub index_set: Vec<u32>,
    pub mass_conserved: bool,
    /// `Σ (2-m) k_{m,1} x*^{m-1}` at the private equilibrium value.
    pub stability_sum: Option<f64>,
    /// The CBP part has a reaction with `v_p = 1, v'_p = 0` on the shared species.
    pub cbp_consumes_shared: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct UniquenessReport {
    pub all_tau_at_most_2: bool,
    pub high_order_parts_mass_conserved: bool,
    pub uniqueness_guaranteed: bool,
    /// `None` when the decision needs an equilibrium that was not supplied.
    pub stability_guaranteed: Option<bool>,
    pub decomposition_condition: bool,
    pub parts: Vec<PartConditions>,
    pub message: String,
}

pub fn check_uniqueness_conditions(
    spec: &CompoundSpec,
    equilibrium: Option<&[f64]>,
) -> UniquenessReport {
    if spec.kind != PartKind::Autoca {
        return UniquenessReport {
            all_tau_at_most_2: false,
            high_order_parts_mass_conserved: false,
            uniqueness_guaranteed: false,
            stability_guaranteed: None,
            decomposition_condition: false,
            parts: Vec::new(),
            message: "not an autocatalytic compound".into(),
        };
    }
    let parts: Vec<PartConditions> = spec
        .parts
        .iter()
        .enumerate()
        .map(|(p, part)| {
            let shape = part.shape.as_ref().expect("autoca part has a shape");
            let shared_global = part.layout[0];
            let local = spec
                .cbp_layout
                .iter()
                .position(|&g| g == shared_global)
                .expect("shared is CBP species");
            let cbp_consumes_shared = spec
                .cbp_part
                .reactions()
                .iter()
                .any(|r| r.reactant.coeff(local) == 1 && r.product.coeff(local) == 0);
            PartConditions {
                part: p + 1,
                tau: shape.tau,
                index_set: shape.index_set.clone(),
                mass_conserved: shape.mass_conserved,
                stability_sum: equilibrium.map(|x| shape.stability_sum(x[part.layout[1]])),
                cbp_consumes_shared,
            }
        })
        .collect();
    let all_tau_at_most_2 = parts.iter().all(|c| c.tau <= 2);
    let high_order_parts_mass_conserved = parts.iter().all(|c| c.tau <= 2 || c.mass_conserved);
    let uniqueness_guaranteed = all_tau_at_most_2 || high_order_parts_mass_conserved;
    let stability_guaranteed =
        if all_tau_at_most_2 {
            Some(true)
        } else if equilibrium.is_some() {
            Some(parts.iter().all(|c| {
                c.tau <= 2 || (c.mass_conserved && c.stability_sum.is_some_and(|s| s > 0.0))
            }))
        } else {
            None
        };
    let decomposition_condition = parts.iter().all(|c| c.cbp_consumes_shared);
    let mut message = match (uniqueness_guaranteed, stability_guaranteed) {
        (false, _) => "uniqueness not guaranteed".to_string(),
        (true, Some(true)) => {
            "uniqueness conditions hold; equilibrium locally asymptotically stable".into()
        }
        (true, Some(false)) => "uniqueness conditions hold; stability side-condition fails".into(),
        (true, None) => "uniqueness conditions hold; stability needs an equilibrium".into(),
    };
    // the decomposition route needs every shared species consumed by a CBP reaction
    if !decomposition_condition {
        message.push_str(
            "; decomposition route not certified (no CBP reaction consumes a shared species)",
        );
    }
    UniquenessReport {
        all_tau_at_most_2,
        high_order_parts_mass_conserved,
        uniqueness_guaranteed,
        stability_guaranteed,
        decomposition_condition,
        parts,
        message,
    }
}

/// An assembled compound with its global network.
#[derive(Debug, Clone)]
pub struct Compound {
    pub spec: CompoundSpec,
    pub network: ReactionNetwork,
}

struct Section<'a> {
    kind: &'a str,
    attrs: BTreeMap<&'a str, &'a str>,
    header_line: usize,
    body: String,
    body_offset: usize,
}

/// Parses a `.crnc` document: a `[cbp]` section (optionally `[cbp d=1,1/2]`)
/// followed by either `[sub1 p=K]` or `[autoca p=K shared=NAME]` sections.
/// In sub1 compounds every species is renamed `p{K}_{name}` (CBP is `p0`).
pub fn parse_compound(text: &str) -> Result<Compound, Vec<ParseDiagnostic>> {
    let mut sections: Vec<Section<'_>> = Vec::new();
    let mut diags = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let trimmed = line.trim();
        if let Some(rest) = trimmed.strip_prefix('[') {
            let Some(inner) = rest.strip_suffix(']') else {
                diags.push(ParseDiagnostic::error(idx + 1, line.len(), "expected `]`"));
                continue;
            };
            let mut words = inner.split_whitespace();
            let kind = words.next().unwrap_or("");
            let mut attrs = BTreeMap::new();
            for w in words {
                match w.split_once('=') {
                    Some((k, v)) => {
                        attrs.insert(k, v);
                    }
                    None => diags.push(ParseDiagnostic::error(
                        idx + 1,
                        1,
                        format!("expected key=value, found `{w}`"),
                    )),
                }
            }
            sections.push(Section {
                kind,
                attrs,
                header_line: idx + 1,
                body: String::new(),
                body_offset: idx + 1,
            });
        } else if let Some(sec) = sections.last_mut() {
            sec.body.push_str(raw);
            sec.body.push('\n');
        } else if !trimmed.is_empty() {
            diags.push(ParseDiagnostic::error(
                idx + 1,
                1,
                "reaction outside of a section",
            ));
        }
    }
    if !diags.is_empty() {
        return Err(diags);
    }
    let Some(first) = sections.first() else {
        return Err(vec![ParseDiagnostic::error(1, 1, "no [cbp] section")]);
    };
    if first.kind != "cbp" {
        return Err(vec![ParseDiagnostic::error(
            first.header_line,
            1,
            "the first section must be [cbp]",
        )]);
    }
    if let Some(extra) = sections.iter().skip(1).find(|s| s.kind == "cbp") {
        return Err(vec![ParseDiagnostic::error(
            extra.header_line,
            1,
            "only one [cbp] section is allowed",
        )]);
    }
    let mut nets = Vec::new();
    for s in &sections {
        if !matches!(s.kind, "cbp" | "sub1" | "autoca") {
            diags.push(ParseDiagnostic::error(
                s.header_line,
                2,
                format!("unknown section `{}`", s.kind),
            ));
            continue;
        }
        match parse_network_at(&s.body, s.body_offset) {
            Ok(n) => nets.push(n),
            Err(mut d) => diags.append(&mut d),
        }
    }
    if !diags.is_empty() {
        return Err(diags);
    }
    let err = |line: usize, msg: String| vec![ParseDiagnostic::error(line, 1, msg)];
    let weights = match first.attrs.get("d") {
        Some(v) => Some(parse_weights(v).map_err(|m| err(first.header_line, m))?),
        None => None,
    };
    let rest = &sections[1..];
    let kinds: HashSet<&str> = rest.iter().map(|s| s.kind).collect();
    if kinds.len() > 1 {
        return Err(err(
            rest[0].header_line,
            "cannot mix [sub1] and [autoca] sections".into(),
        ));
    }
    let mut order: Vec<(u64, usize)> = Vec::new();
    for (i, s) in rest.iter().enumerate() {
        let p = s
            .attrs
            .get("p")
            .ok_or_else(|| err(s.header_line, "missing p=K".into()))?
            .parse::<u64>()
            .ok()
            .filter(|&p| p >= 1)
            .ok_or_else(|| err(s.header_line, "p must be a positive integer".into()))?;
        if order.iter().any(|(q, _)| *q == p) {
            return Err(err(s.header_line, format!("part p={p} defined twice")));
        }
        order.push((p, i));
    }
    order.sort();
    let cbp = nets[0].clone();
    let compound = if kinds.contains("autoca") {
        let mut bindings = Vec::new();
        for &(_, i) in &order {
            let s = &rest[i];
            let net = &nets[i + 1];
            let shared = s
                .attrs
                .get("shared")
                .copied()
                .unwrap_or(net.species_names()[0].as_str());
            let Some(cbp_idx) = cbp.species_index(shared) else {
                return Err(err(
                    s.header_line,
                    format!("shared species `{shared}` is not a CBP species"),
                ));
            };
            let Some(local) = net.species_index(shared) else {
                return Err(err(
                    s.header_line,
                    format!("shared species `{shared}` does not occur in this part"),
                ));
            };
            if net.num_species() != 2 {
                return Err(err(
                    s.header_line,
                    ComposeError::SpeciesCount(net.num_species()).to_string(),
                ));
            }
            let names = vec![
                net.species_names()[local].clone(),
                net.species_names()[1 - local].clone(),
            ];
            let map = if local == 0 { [0, 1] } else { [1, 0] };
            let net = net
                .reindexed(names, &map)
                .map_err(|e| err(s.header_line, e.to_string()))?;
            bindings.push((cbp_idx, net));
        }
        compose_autoca(&cbp, &bindings)
            .map_err(|e| err(rest[order[0].1].header_line, e.to_string()))?
    } else {
        let rename = |p: u64, net: &ReactionNetwork| {
            let names = net
                .species_names()
                .iter()
                .map(|s| format!("p{p}_{s}"))
                .collect();
            let map: Vec<usize> = (0..net.num_species()).collect();
            net.reindexed(names, &map).expect("renaming keeps validity")
        };
        let cbp_r = rename(0, &cbp);
        let parts: Vec<ReactionNetwork> = order
            .iter()
            .map(|&(p, i)| rename(p, &nets[i + 1]))
            .collect();
        let line = order
            .first()
            .map_or(first.header_line, |&(_, i)| rest[i].header_line);
        compose_sub1(&cbp_r, &parts).map_err(|e| {
            let line = match &e {
                ComposeError::Dimension { part, .. } => rest[order[part - 1].1].header_line,
                _ => line,
            };
            err(line, e.to_string())
        })?
    };
    let (mut spec, network) = compound;
    if let Some(w) = weights {
        spec = spec
            .with_weights(w)
            .map_err(|e| err(first.header_line, e.to_string()))?;
    }
    Ok(Compound { spec, network })
}

fn parse_weights(text: &str) -> Result<Vec<BigRational>, String> {
    text.split(',')
        .map(|t| {
            let (p, q) = t.split_once('/').unwrap_or((t, "1"));
            let p: BigInt = p.trim().parse().map_err(|_| format!("bad weight `{t}`"))?;
            let q: BigInt = q.trim().parse().map_err(|_| format!("bad weight `{t}`"))?;
            if q.is_zero() || !p.is_positive() || !q.is_positive() {
                return Err(format!("weight `{t}` must be a positive rational"));
            }
            Ok(BigRational::new(p, q))
        })
        .collect()
}
