//! Campaign runner and tooling around `attestree-core`: graph sources,
//! configuration files, experiment campaigns with CSV output, and the
//! simulated-versus-analytic oracle.

pub mod campaign;
pub mod config;
pub mod graph_spec;
pub mod oracle;
pub mod stats;
pub mod trace;
