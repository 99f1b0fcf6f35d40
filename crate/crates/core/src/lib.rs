//! Water network pressure estimation: an EPANET INP reader, a demand-driven
//! steady-state solver, a seeded snapshot generator and a residual
//! graph-attention estimator trained under random sensor masking.

pub mod cli;
pub mod generator;
pub mod gnn;
pub mod graph;
pub mod hydraulics;
pub mod inp;
pub mod network;
pub mod seed;
pub mod sparse;
pub mod training;
pub mod units;
pub mod validate;
