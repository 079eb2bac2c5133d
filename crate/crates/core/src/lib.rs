//! Mass-action reaction networks: structural analysis, complex-balanced
//! production (CBP) networks, compound networks and Lyapunov functions that
//! solve the Lyapunov function PDE.

pub mod balance;
pub mod cbp;
pub mod compose;
pub mod linalg;
pub mod lyapunov;
pub mod model;
pub mod parser;
pub mod poly;
pub mod quadrature;
pub mod sim;
pub mod structure;

pub use balance::{find_equilibrium, EquilibriumResult};
pub use cbp::{CbpResult, ScalingMatrix};
pub use compose::{Compound, CompoundSpec, PartKind};
pub use lyapunov::{LyapunovError, LyapunovFunction};
pub use model::{Complex, Rate, Reaction, ReactionNetwork, SpeciesId, State};
pub use parser::{parse_network, ParseDiagnostic};
pub use sim::Trajectory;
pub use structure::StructureReport;
