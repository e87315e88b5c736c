//! Library side of the `ksw` command-line tool: flat key-value configs,
//! deterministic CSV/JSON report writers, run manifests with content hashes,
//! and the drivers behind each subcommand.
//!
//! Everything here is deterministic under a fixed `(config, seed)` pair;
//! re-running a command reproduces byte-identical artifacts, which the run
//! manifest records via SHA-256 digests.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod report;

pub use config::Config;
pub use manifest::RunManifest;
