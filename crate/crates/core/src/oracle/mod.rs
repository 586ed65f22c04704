// SPDX-License-Identifier: Apache-2.0

//! Reference semantics: diagrams and reduced programs as quantum channels.

pub mod circuit;
pub mod cpm;
pub mod tensor;

use std::fmt;

pub use circuit::{extract_circuit, simulate_circuit, Circuit, CircuitOp, MAX_SIMULATED_WIRES};
pub use cpm::{cpm_distance_mod_scalar, cpm_equal_mod_scalar, interpret, CpMap};

/// Default bound on input plus output qubits for dense simulation.
pub const DEFAULT_MAX_QUBITS: usize = 8;

/// `SZXC_MAX_QUBITS` when set to a number, else the default.
pub fn max_qubits_from_env() -> usize {
    std::env::var("SZXC_MAX_QUBITS")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_MAX_QUBITS)
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleError {
    Invalid(String),
    TooManyQubits { qubits: usize, limit: usize },
    Contraction(String),
    Extraction(String),
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::Invalid(m) => write!(f, "invalid diagram: {m}"),
            OracleError::TooManyQubits { qubits, limit } => write!(
                f,
                "{qubits} boundary qubits exceed the simulation limit of {limit} (set SZXC_MAX_QUBITS to raise it)"
            ),
            OracleError::Contraction(m) => write!(f, "{m}"),
            OracleError::Extraction(m) => write!(f, "circuit extraction failed: {m}"),
        }
    }
}

impl std::error::Error for OracleError {}
