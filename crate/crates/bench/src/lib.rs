//! Fixtures shared by the benchmarks.

use crn_lyap::compose::{self, Compound};
use crn_lyap::{parse_network, ReactionNetwork};

fn read(name: &str) -> String {
    let path = format!("{}/../../data/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

pub fn network(name: &str) -> ReactionNetwork {
    parse_network(&read(name)).expect("fixture parses")
}

pub fn compound(name: &str) -> Compound {
    compose::parse_compound(&read(name)).expect("fixture parses")
}
