//! The `ragkit` command line: one subcommand per stage plus an end-to-end
//! `run` that writes a JSONL submission and its manifest.

pub mod args;
pub mod commands;
pub mod manifest;

pub use commands::{dispatch, run_with_config, BatchSummary, CliError, RunConfig, EXIT_FAILED, EXIT_OK, EXIT_PARTIAL};
pub use manifest::{manifest_path, sha256_file, RunManifest};
