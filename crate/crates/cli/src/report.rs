//! The JSON report shared by every subcommand.

use std::io::{self, Write};

use crn_lyap::balance::EquilibriumResult;
use crn_lyap::cbp::Candidates;
use crn_lyap::compose::{PartKind, UniquenessReport};
use crn_lyap::lyapunov::StabilityReport;
use crn_lyap::parser::{format_reaction, serialize_network};
use crn_lyap::sim::ConvergenceReport;
use crn_lyap::{ParseDiagnostic, ReactionNetwork, StructureReport};
use serde::Serialize;
use serde_json::ser::Formatter;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Serialize)]
pub struct Report {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub input: String,
    pub diagnostics: Vec<ParseDiagnostic>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkEcho>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub structure: Option<StructureReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compound: Option<CompoundSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equilibrium: Option<EquilibriumResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cbp: Option<CbpSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lyapunov: Option<Certificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorInfo>,
}

impl Report {
    pub fn new(command: &'static str, input: &str) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            command,
            input: input.to_string(),
            diagnostics: Vec::new(),
            network: None,
            structure: None,
            compound: None,
            equilibrium: None,
            cbp: None,
            lyapunov: None,
            simulation: None,
            error: None,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct NetworkEcho {
    pub species: Vec<String>,
    pub reactions: Vec<String>,
    pub canonical: String,
}

impl NetworkEcho {
    pub fn of(net: &ReactionNetwork) -> Self {
        let names = net.species_names();
        NetworkEcho {
            species: names.to_vec(),
            reactions: net
                .reactions()
                .iter()
                .map(|r| format_reaction(r, names))
                .collect(),
            canonical: serialize_network(net),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CompoundPartSummary {
    pub kind: PartKind,
    pub species: Vec<String>,
    pub shared_species: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct CompoundSummary {
    pub kind: PartKind,
    pub cbp_species: Vec<String>,
    /// `p/q` weights of the CBP part, when declared.
    pub cbp_weights: Option<Vec<String>>,
    pub parts: Vec<CompoundPartSummary>,
    /// Autocatalytic compounds only.
    pub uniqueness: Option<UniquenessReport>,
}

#[derive(Debug, Serialize)]
pub struct CbpEntry {
    pub scaling: Vec<String>,
    pub reactions: Vec<String>,
    pub file: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct CbpSummary {
    pub max_denominator: u64,
    pub limit: usize,
    pub feasible: Vec<Candidates>,
    pub count: usize,
    pub networks: Vec<CbpEntry>,
    /// Set when the source could not be confirmed complex balanced.
    pub warnings: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct Sampling {
    pub region: &'static str,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
pub struct ResidualStats {
    pub max_abs: f64,
    pub mean_abs: f64,
    /// `max |residual| / max(1, Σ R_i(x))`; compared against `tol`.
    pub max_scaled: f64,
    pub tol: f64,
    pub passed: bool,
}

#[derive(Debug, Serialize)]
pub struct Certificate {
    pub kind_requested: String,
    pub family: String,
    pub selection: String,
    pub equilibrium: Vec<f64>,
    pub weights: Option<Vec<f64>>,
    pub sampling: Sampling,
    pub residual: ResidualStats,
    pub stability: StabilityReport,
    pub passed: bool,
}

#[derive(Debug, Serialize)]
pub struct SimulationSummary {
    pub x0: Vec<f64>,
    pub t_end: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub accepted_steps: usize,
    pub clamp_events: usize,
    pub final_state: Vec<f64>,
    pub convergence: Option<ConvergenceReport>,
    pub csv: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct ErrorInfo {
    pub kind: &'static str,
    pub exit_code: i32,
    pub message: String,
}

/// Compact layout (the trait defaults) with every float written to 17 significant digits.
struct Digits17;

impl Formatter for Digits17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
}

pub fn write_json<W: Write>(report: &Report, mut w: W) -> io::Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(&mut w, Digits17);
    report.serialize(&mut ser).map_err(io::Error::other)?;
    writeln!(w)
}
