//! `crn-lyap`: structure, equilibria, CBP enumeration, Lyapunov certificates
//! and simulation of mass-action networks from `.crn` and `.crnc` files.

mod commands;
mod report;

use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::{CliError, Outcome};
use crate::report::{write_json, ErrorInfo, Report};

#[derive(Parser, Debug)]
#[command(
    name = "crn-lyap",
    version,
    about = "Lyapunov certificates for mass-action reaction networks"
)]
struct Cli {
    /// Worker threads for batch work (default: available parallelism).
    #[arg(long, global = true, env = "CRN_LYAP_JOBS")]
    jobs: Option<usize>,
    /// Emit the JSON report on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct SamplingArgs {
    /// Points sampled log-uniformly in [x*/10, 10x*].
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    /// Bound on the scaled PDE residual.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Auto,
    Helmholtz,
    Onedim,
    Compound,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a network and echo its canonical form.
    Parse { file: PathBuf },
    /// Stoichiometric structure, deficiency and linkage classes.
    Analyze { file: PathBuf },
    /// Positive equilibrium in the compatibility class of `--x0`.
    Equilibrium {
        file: PathBuf,
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            required = true
        )]
        x0: Vec<f64>,
        #[arg(long, default_value_t = crn_lyap::balance::DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = crn_lyap::balance::DEFAULT_MAX_ITER)]
        max_iter: usize,
    },
    /// Enumerate the CBP networks generated from a network.
    Cbp {
        file: PathBuf,
        #[arg(long, default_value_t = crn_lyap::cbp::DEFAULT_MAX_DENOMINATOR)]
        max_denom: u64,
        #[arg(long, default_value_t = crn_lyap::cbp::DEFAULT_LIMIT)]
        limit: usize,
        /// Write each generated network to DIR as `.crn`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Start point for the source equilibrium check (default: all ones).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
    },
    /// Build a Lyapunov function at the equilibrium reached from `--x0` and certify it.
    Lyapunov {
        file: PathBuf,
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            required = true
        )]
        x0: Vec<f64>,
        #[arg(long, value_enum, default_value_t = Kind::Auto)]
        kind: Kind,
        #[command(flatten)]
        sampling: SamplingArgs,
    },
    /// Integrate the mass-action ODE.
    Simulate {
        file: PathBuf,
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            required = true
        )]
        x0: Vec<f64>,
        #[arg(long)]
        t_end: f64,
        #[arg(long, default_value_t = crn_lyap::sim::DEFAULT_REL_TOL)]
        rel_tol: f64,
        #[arg(long, default_value_t = crn_lyap::sim::DEFAULT_ABS_TOL)]
        abs_tol: f64,
        /// Record a Lyapunov function along the trajectory.
        #[arg(long)]
        lyapunov: bool,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Assemble a `.crnc` compound and run the full pipeline.
    Compound {
        file: PathBuf,
        /// Start point (default: all ones).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        #[arg(long, default_value_t = 100.0)]
        t_end: f64,
        #[command(flatten)]
        sampling: SamplingArgs,
    },
}

fn run(cli: Cli) -> (Report, Result<Outcome, CliError>) {
    match cli.command {
        Command::Parse { file } => commands::parse(&file),
        Command::Analyze { file } => commands::analyze(&file),
        Command::Equilibrium {
            file,
            x0,
            tol,
            max_iter,
        } => commands::equilibrium(&file, &x0, tol, max_iter),
        Command::Cbp {
            file,
            max_denom,
            limit,
            out,
            x0,
        } => commands::cbp(&file, max_denom, limit, out.as_deref(), x0.as_deref()),
        Command::Lyapunov {
            file,
            x0,
            kind,
            sampling,
        } => commands::lyapunov(&file, &x0, kind, &sampling),
        Command::Simulate {
            file,
            x0,
            t_end,
            rel_tol,
            abs_tol,
            lyapunov,
            csv,
        } => commands::simulate(
            &file,
            &x0,
            t_end,
            rel_tol,
            abs_tol,
            lyapunov,
            csv.as_deref(),
        ),
        Command::Compound {
            file,
            x0,
            t_end,
            sampling,
        } => commands::compound(&file, x0.as_deref(), t_end, &sampling),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs.filter(|&n| n > 0) {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("warning: {e}");
        }
    }
    let json = cli.json;
    let (mut report, result) = run(cli);
    let code = match &result {
        Ok(Outcome::Pass) => 0,
        Ok(Outcome::CertificateFailed(_)) => 4,
        Err(e) => e.exit_code(),
    };
    match &result {
        Ok(Outcome::Pass) => {}
        Ok(Outcome::CertificateFailed(msg)) => {
            report.error = Some(ErrorInfo {
                kind: "certificate",
                exit_code: code,
                message: msg.clone(),
            });
        }
        Err(e) => {
            report.error = Some(ErrorInfo {
                kind: e.kind(),
                exit_code: code,
                message: e.to_string(),
            });
        }
    }
    for d in &report.diagnostics {
        eprintln!("{}:{d}", report.input);
    }
    if let Some(err) = &report.error {
        eprintln!("{}: {}", err.kind, err.message);
    }
    let written = if json {
        write_json(&report, io::stdout().lock())
    } else {
        commands::write_text(&report, io::stdout().lock())
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(3);
    }
    ExitCode::from(code as u8)
}
