//! Reading and writing the EPANET INP text format.
//!
//! Only the sections needed for steady-state, demand-driven hydraulics are
//! interpreted: `TITLE`, `JUNCTIONS`, `RESERVOIRS`, `TANKS`, `PIPES`,
//! `PUMPS`, `VALVES`, `DEMANDS`, `PATTERNS`, `CURVES`, `STATUS`, `OPTIONS`
//! and `COORDINATES`, plus the pattern time step of `TIMES`. Everything else
//! is skipped and noted in
//! [`NetworkModel::warnings`](crate::network::NetworkModel::warnings).

mod parse;
mod write;

pub use parse::parse_inp;
pub use write::serialize_inp;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InpError {
    #[error("line {line}: link {link} references unknown node {node:?}")]
    UnknownNodeReference {
        node: String,
        link: String,
        line: usize,
    },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { id: String, line: usize },
    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("missing required section [{0}]")]
    MissingRequiredSection(&'static str),
}

/// Pressure head conversion for valve settings given in psi.
pub(crate) const PSI_TO_METERS: f64 = 0.703_069_6;
