//! Command-line front end for the index-theory laboratory: strict JSON
//! experiment configs in, deterministic JSON reports (plus CSV exports
//! and a checksum manifest) out.

pub mod config;
pub mod runner;
