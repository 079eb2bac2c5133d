use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crn_lyap::balance::{self, EquilibriumResult, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crn_lyap::cbp;
use crn_lyap::compose::{self, Compound, PartKind};
use crn_lyap::lyapunov::{self, LyapunovError, LyapunovFunction};
use crn_lyap::parser::serialize_network;
use crn_lyap::{parse_network, sim, structure, ReactionNetwork};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::report::*;
use crate::{Kind, SamplingArgs};

pub enum Outcome {
    Pass,
    CertificateFailed(String),
}

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Parse(usize),
    Usage(String),
    Numerical(String),
    /// No constructed family applies; reported as a failed certificate.
    NoFamily(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) | CliError::Parse(_) | CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::NoFamily(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io(_) => "input",
            CliError::Parse(_) => "parse",
            CliError::Usage(_) => "usage",
            CliError::Numerical(_) => "numerical",
            CliError::NoFamily(_) => "certificate",
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(m)
            | CliError::Usage(m)
            | CliError::Numerical(m)
            | CliError::NoFamily(m) => f.write_str(m),
            CliError::Parse(n) => write!(f, "{n} parse error(s)"),
        }
    }
}

impl From<LyapunovError> for CliError {
    fn from(e: LyapunovError) -> Self {
        match e {
            LyapunovError::NotOneDimensional(_)
            | LyapunovError::NotEquilibrium(_)
            | LyapunovError::UnknownScaling(_)
            | LyapunovError::Mismatch(_) => CliError::NoFamily(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

pub type Run = (Report, Result<Outcome, CliError>);

enum Loaded {
    Plain(ReactionNetwork),
    Compound(Box<Compound>),
}

impl Loaded {
    fn network(&self) -> &ReactionNetwork {
        match self {
            Loaded::Plain(n) => n,
            Loaded::Compound(c) => &c.network,
        }
    }
}

fn looks_like_compound(path: &Path, text: &str) -> bool {
    path.extension().is_some_and(|e| e == "crnc")
        || text.lines().any(|l| l.trim_start().starts_with('['))
}

fn load(path: &Path, report: &mut Report) -> Result<Loaded, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let parsed = if looks_like_compound(path, &text) {
        compose::parse_compound(&text).map(|c| Loaded::Compound(Box::new(c)))
    } else {
        parse_network(&text).map(Loaded::Plain)
    };
    match parsed {
        Ok(loaded) => {
            report.network = Some(NetworkEcho::of(loaded.network()));
            Ok(loaded)
        }
        Err(diags) => {
            let n = diags.len();
            report.diagnostics = diags;
            Err(CliError::Parse(n))
        }
    }
}

fn check_dim(net: &ReactionNetwork, x: &[f64]) -> Result<(), CliError> {
    if x.len() != net.num_species() {
        return Err(CliError::Usage(format!(
            "--x0 has {} entries, network has {} species",
            x.len(),
            net.num_species()
        )));
    }
    if x.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(CliError::Usage(
            "--x0 entries must be finite and non-negative".into(),
        ));
    }
    Ok(())
}

fn solve(
    net: &ReactionNetwork,
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<EquilibriumResult, CliError> {
    check_dim(net, x0)?;
    balance::find_equilibrium(net, x0, tol, max_iter)
        .map_err(|e| CliError::Numerical(e.to_string()))
}

fn with_report(
    command: &'static str,
    file: &Path,
    body: impl FnOnce(&mut Report) -> Result<Outcome, CliError>,
) -> Run {
    let mut report = Report::new(command, &file.display().to_string());
    let result = body(&mut report);
    (report, result)
}

pub fn parse(file: &Path) -> Run {
    with_report("parse", file, |report| {
        load(file, report).map(|_| Outcome::Pass)
    })
}

fn compound_summary(c: &Compound, equilibrium: Option<&[f64]>) -> CompoundSummary {
    let names = c.network.species_names();
    CompoundSummary {
        kind: c.spec.kind,
        cbp_species: c
            .spec
            .cbp_layout
            .iter()
            .map(|&g| names[g].clone())
            .collect(),
        cbp_weights: c
            .spec
            .cbp_weights
            .as_ref()
            .map(|w| w.iter().map(ToString::to_string).collect()),
        parts: c
            .spec
            .parts
            .iter()
            .map(|p| CompoundPartSummary {
                kind: p.kind,
                species: p.layout.iter().map(|&g| names[g].clone()).collect(),
                shared_species: p.shared_species.as_ref().map(|s| s.name.clone()),
            })
            .collect(),
        uniqueness: (c.spec.kind == PartKind::Autoca)
            .then(|| compose::check_uniqueness_conditions(&c.spec, equilibrium)),
    }
}

pub fn analyze(file: &Path) -> Run {
    with_report("analyze", file, |report| {
        let loaded = load(file, report)?;
        report.structure = Some(structure::analyze(loaded.network()));
        if let Loaded::Compound(c) = &loaded {
            report.compound = Some(compound_summary(c, None));
        }
        Ok(Outcome::Pass)
    })
}

pub fn equilibrium(file: &Path, x0: &[f64], tol: f64, max_iter: usize) -> Run {
    with_report("equilibrium", file, |report| {
        let loaded = load(file, report)?;
        report.equilibrium = Some(solve(loaded.network(), x0, tol, max_iter)?);
        Ok(Outcome::Pass)
    })
}

fn source_warnings(net: &ReactionNetwork, x0: Option<&[f64]>) -> Result<Vec<String>, CliError> {
    let x0 = x0
        .map(<[f64]>::to_vec)
        .unwrap_or_else(|| vec![1.0; net.num_species()]);
    check_dim(net, &x0)?;
    Ok(match balance::find_equilibrium(net, &x0, DEFAULT_TOL, DEFAULT_MAX_ITER) {
        Ok(eq) if eq.classification.is_complex_balanced => Vec::new(),
        Ok(eq) => vec![format!(
            "source is not complex balanced at its equilibrium [{}]; the generated networks are rescalings, not CBP networks",
            list(&eq.point)
        )],
        Err(e) => vec![format!("no positive equilibrium found from x0 ({e}); complex balance of the source is unverified")],
    })
}

pub fn cbp(
    file: &Path,
    max_denom: u64,
    limit: usize,
    out: Option<&Path>,
    x0: Option<&[f64]>,
) -> Run {
    with_report("cbp", file, |report| {
        let loaded = load(file, report)?;
        let net = loaded.network();
        let warnings = source_warnings(net, x0)?;
        let feasible = cbp::feasible_scalings(net, max_denom);
        let generated = cbp::enumerate_cbp(net, max_denom, limit);
        if let Some(dir) = out {
            fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        }
        let mut networks = Vec::with_capacity(generated.len());
        for (k, c) in generated.iter().enumerate() {
            let scaling = c.scaling.to_strings();
            let file = match out {
                Some(dir) => {
                    let path = dir.join(format!("cbp_{:03}.crn", k + 1));
                    let text = format!(
                        "# d = {}\n{}",
                        scaling.join(" "),
                        serialize_network(&c.network)
                    );
                    fs::write(&path, text)
                        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                    Some(path.display().to_string())
                }
                None => None,
            };
            networks.push(CbpEntry {
                scaling,
                reactions: NetworkEcho::of(&c.network).reactions,
                file,
            });
        }
        report.cbp = Some(CbpSummary {
            max_denominator: max_denom,
            limit,
            feasible,
            count: networks.len(),
            networks,
            warnings,
        });
        Ok(Outcome::Pass)
    })
}

struct Selected {
    f: LyapunovFunction,
    selection: String,
    weights: Option<Vec<f64>>,
}

fn helmholtz(net: &ReactionNetwork, eq: &EquilibriumResult) -> Result<Selected, CliError> {
    let x = &eq.point;
    if eq.classification.is_complex_balanced {
        let f = lyapunov::build_pseudo_helmholtz(x, None)?;
        return Ok(Selected {
            f,
            selection: "complex balanced at the equilibrium".into(),
            weights: None,
        });
    }
    match cbp::recover_scaling(net, x, cbp::DEFAULT_MAX_DENOMINATOR) {
        Some((d, _)) => {
            let w: Vec<f64> = d.iter().map(crn_lyap::linalg::ratio_to_f64).collect();
            let f = lyapunov::build_pseudo_helmholtz(x, Some(&w))?;
            let d: Vec<String> = d.iter().map(ToString::to_string).collect();
            let selection = format!(
                "CBP network; source complex balanced under d = ({})",
                d.join(", ")
            );
            Ok(Selected {
                f,
                selection,
                weights: Some(w),
            })
        }
        None => {
            let f = lyapunov::build_pseudo_helmholtz(x, None)?;
            Ok(Selected {
                f,
                selection: "unweighted; no balanced source recovered".into(),
                weights: None,
            })
        }
    }
}

fn select(loaded: &Loaded, eq: &EquilibriumResult, kind: Kind) -> Result<Selected, CliError> {
    let net = loaded.network();
    let onedim = || -> Result<Selected, CliError> {
        let f = lyapunov::build_onedim(net, &eq.point)?;
        Ok(Selected {
            f,
            selection: "one-dimensional stoichiometric subspace".into(),
            weights: None,
        })
    };
    match (kind, loaded) {
        (Kind::Auto | Kind::Compound, Loaded::Compound(c)) => {
            let f = lyapunov::build_compound(&c.spec, &eq.point)?;
            Ok(Selected {
                f,
                selection: "compound input".into(),
                weights: None,
            })
        }
        (Kind::Compound, Loaded::Plain(_)) => Err(CliError::NoFamily(
            "compound functions need a .crnc input".into(),
        )),
        (Kind::Helmholtz, _) => helmholtz(net, eq),
        (Kind::Onedim, _) => onedim(),
        (Kind::Auto, Loaded::Plain(_)) => {
            if eq.classification.is_complex_balanced {
                return helmholtz(net, eq);
            }
            if cbp::recover_scaling(net, &eq.point, cbp::DEFAULT_MAX_DENOMINATOR).is_some() {
                return helmholtz(net, eq);
            }
            if structure::analyze(net).dim_s == 1 {
                return onedim();
            }
            Err(CliError::NoFamily(
                "not complex balanced, no balanced source recovered, and dim S > 1".into(),
            ))
        }
    }
}

const LN_10: f64 = std::f64::consts::LN_10;

fn certify(
    loaded: &Loaded,
    eq: &EquilibriumResult,
    kind: Kind,
    s: &SamplingArgs,
) -> Result<Certificate, CliError> {
    let net = loaded.network();
    let sel = select(loaded, eq, kind)?;
    let x_star = &eq.point;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let points: Vec<Vec<f64>> = (0..s.samples)
        .map(|_| {
            x_star
                .iter()
                .map(|&v| v * rng.random_range(-LN_10..LN_10).exp())
                .collect()
        })
        .collect();
    let ma = net.compile();
    let residuals: Vec<(f64, f64)> = points
        .par_iter()
        .map(|x| {
            let r = lyapunov::pde_residual(net, &sel.f, x)?.abs();
            Ok((r, r / ma.rates(x).iter().sum::<f64>().max(1.0)))
        })
        .collect::<Result<_, LyapunovError>>()?;
    let max_abs = residuals.iter().map(|r| r.0).fold(0.0, f64::max);
    let mean_abs = residuals.iter().map(|r| r.0).sum::<f64>() / residuals.len().max(1) as f64;
    let max_scaled = residuals.iter().map(|r| r.1).fold(0.0, f64::max);
    let residual = ResidualStats {
        max_abs,
        mean_abs,
        max_scaled,
        tol: s.tol,
        passed: max_scaled <= s.tol,
    };
    let stability = lyapunov::stability_conditions(net, &sel.f, x_star);
    let passed = residual.passed && stability.certified;
    Ok(Certificate {
        kind_requested: format!("{kind:?}").to_lowercase(),
        family: sel.f.family().to_string(),
        selection: sel.selection,
        equilibrium: x_star.clone(),
        weights: sel.weights,
        sampling: Sampling {
            region: "log-uniform in [x*/10, 10x*]",
            samples: s.samples,
            seed: s.seed,
        },
        residual,
        stability,
        passed,
    })
}

fn verdict(cert: &Certificate) -> Outcome {
    if cert.passed {
        Outcome::Pass
    } else if !cert.residual.passed {
        Outcome::CertificateFailed(format!(
            "scaled PDE residual {:e} exceeds {:e}",
            cert.residual.max_scaled, cert.residual.tol
        ))
    } else {
        Outcome::CertificateFailed("stability conditions not met at the equilibrium".into())
    }
}

pub fn lyapunov(file: &Path, x0: &[f64], kind: Kind, s: &SamplingArgs) -> Run {
    with_report("lyapunov", file, |report| {
        let loaded = load(file, report)?;
        let eq = solve(loaded.network(), x0, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
        let cert = certify(&loaded, &eq, kind, s);
        report.equilibrium = Some(eq);
        let cert = cert?;
        let outcome = verdict(&cert);
        report.lyapunov = Some(cert);
        Ok(outcome)
    })
}

fn run_sim(
    net: &ReactionNetwork,
    x0: &[f64],
    t_end: f64,
    tols: (f64, f64),
    f: Option<(&LyapunovFunction, &[f64])>,
    csv: Option<&Path>,
) -> Result<SimulationSummary, CliError> {
    check_dim(net, x0)?;
    let traj = sim::integrate(net, x0, t_end, tols.0, tols.1, f.map(|f| f.0))
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    if let Some(path) = csv {
        let file =
            fs::File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        traj.write_csv(net.species_names(), io::BufWriter::new(file))
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(SimulationSummary {
        x0: x0.to_vec(),
        t_end,
        rel_tol: tols.0,
        abs_tol: tols.1,
        accepted_steps: traj.times.len() - 1,
        clamp_events: traj.clamp_events,
        final_state: traj.last_state().to_vec(),
        convergence: f.map(|(_, x_star)| sim::convergence_report(&traj, x_star)),
        csv: csv.map(|p| p.display().to_string()),
    })
}

pub fn simulate(
    file: &Path,
    x0: &[f64],
    t_end: f64,
    rel_tol: f64,
    abs_tol: f64,
    with_lyapunov: bool,
    csv: Option<&Path>,
) -> Run {
    with_report("simulate", file, |report| {
        let loaded = load(file, report)?;
        let net = loaded.network();
        let selected = if with_lyapunov {
            let eq = solve(net, x0, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
            let sel = select(&loaded, &eq, Kind::Auto)?;
            report.equilibrium = Some(eq);
            Some(sel.f)
        } else {
            None
        };
        let star = report.equilibrium.as_ref().map(|e| e.point.clone());
        let f = selected.as_ref().zip(star.as_deref());
        report.simulation = Some(run_sim(net, x0, t_end, (rel_tol, abs_tol), f, csv)?);
        Ok(Outcome::Pass)
    })
}

pub fn compound(file: &Path, x0: Option<&[f64]>, t_end: f64, s: &SamplingArgs) -> Run {
    with_report("compound", file, |report| {
        let loaded = load(file, report)?;
        let Loaded::Compound(c) = &loaded else {
            return Err(CliError::Usage("expected a compound (.crnc) input".into()));
        };
        let x0 = x0
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![1.0; c.network.num_species()]);
        report.structure = Some(structure::analyze(&c.network));
        report.compound = Some(compound_summary(c, None));
        let eq = solve(&c.network, &x0, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
        report.compound = Some(compound_summary(c, Some(&eq.point)));
        let cert = certify(&loaded, &eq, Kind::Compound, s);
        report.equilibrium = Some(eq);
        let cert = cert?;
        let f = lyapunov::build_compound(&c.spec, &cert.equilibrium)?;
        let sim = run_sim(
            &c.network,
            &x0,
            t_end,
            (sim::DEFAULT_REL_TOL, sim::DEFAULT_ABS_TOL),
            Some((&f, &cert.equilibrium)),
            None,
        )?;
        report.simulation = Some(sim);
        let outcome = verdict(&cert);
        report.lyapunov = Some(cert);
        Ok(outcome)
    })
}

fn list(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Human-readable rendering of whatever sections the report holds.
pub fn write_text<W: Write>(r: &Report, mut w: W) -> io::Result<()> {
    if r.command == "parse" {
        if let Some(n) = &r.network {
            write!(w, "{}", n.canonical)?;
        }
        return Ok(());
    }
    if let Some(s) = &r.structure {
        writeln!(
            w,
            "species: {}  reactions: {}",
            s.num_species, s.num_reactions
        )?;
        writeln!(
            w,
            "complexes: {}  linkage classes: {}",
            s.num_complexes, s.num_linkage_classes
        )?;
        writeln!(w, "dim S: {}  deficiency: {}", s.dim_s, s.deficiency)?;
        writeln!(w, "weakly reversible: {}", s.weakly_reversible)?;
        for c in &s.conservation_basis {
            writeln!(w, "conservation law: {c:?}")?;
        }
    }
    if let Some(c) = &r.compound {
        writeln!(w, "compound: {:?} with {} part(s)", c.kind, c.parts.len())?;
        if let Some(u) = &c.uniqueness {
            writeln!(w, "conditions: {}", u.message)?;
        }
    }
    if let Some(e) = &r.equilibrium {
        writeln!(w, "equilibrium: [{}]", list(&e.point))?;
        writeln!(
            w,
            "residual: {:e}  iterations: {}",
            e.residual, e.iterations
        )?;
        writeln!(
            w,
            "complex balanced: {}  reaction-vector balanced: {}",
            e.classification.is_complex_balanced, e.classification.is_reaction_vector_balanced
        )?;
        for eta in &e.unpaired_reaction_vectors {
            writeln!(w, "unpaired reaction vector: {eta:?}")?;
        }
    }
    if let Some(c) = &r.cbp {
        for m in &c.warnings {
            writeln!(w, "warning: {m}")?;
        }
        writeln!(w, "{} CBP network(s)", c.count)?;
        for n in &c.networks {
            writeln!(
                w,
                "d = ({}): {}",
                n.scaling.join(", "),
                n.reactions.join("; ")
            )?;
        }
    }
    if let Some(l) = &r.lyapunov {
        writeln!(w, "family: {} ({})", l.family, l.selection)?;
        writeln!(
            w,
            "PDE residual over {} samples: max {:e}, scaled max {:e} (tol {:e})",
            l.sampling.samples, l.residual.max_abs, l.residual.max_scaled, l.residual.tol
        )?;
        for c in &l.stability.side_conditions {
            writeln!(
                w,
                "side condition {}: {} ({})",
                c.name,
                c.value,
                if c.passed { "ok" } else { "fails" }
            )?;
        }
        if let Some(m) = l.stability.projected_hessian_min_eigenvalue {
            writeln!(w, "projected Hessian min eigenvalue: {m:e}")?;
        }
        writeln!(w, "certificate: {}", if l.passed { "PASS" } else { "FAIL" })?;
    }
    if let Some(s) = &r.simulation {
        writeln!(
            w,
            "t = {}: [{}] after {} steps",
            s.t_end,
            list(&s.final_state),
            s.accepted_steps
        )?;
        if let Some(c) = &s.convergence {
            writeln!(w, "distance to equilibrium: {:e}", c.final_distance)?;
            if let Some(m) = c.f_monotone {
                writeln!(w, "Lyapunov values non-increasing: {m}")?;
            }
        }
    }
    Ok(())
}
