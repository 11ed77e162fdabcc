//! Library side of the `qsl` command: experiment specs, the subcommands and
//! output assembly. `main.rs` only parses arguments.

pub mod commands;
pub mod experiment;

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::commands::Table;
use crate::experiment::{ExperimentSpec, Format};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NO_CONVERGENCE: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

/// An invariant check failed after its output was written.
#[derive(Debug)]
pub struct InvariantFailure(pub String);

impl std::fmt::Display for InvariantFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invariant check failed: {}", self.0)
    }
}

impl std::error::Error for InvariantFailure {}

/// The optimizer finished without meeting its stopping criterion.
#[derive(Debug)]
pub struct NotConverged(pub String);

impl std::fmt::Display for NotConverged {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "optimizer did not converge: {}", self.0)
    }
}

impl std::error::Error for NotConverged {}

pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<InvariantFailure>().is_some() {
        return EXIT_INVARIANT;
    }
    if err.downcast_ref::<NotConverged>().is_some() {
        return EXIT_NO_CONVERGENCE;
    }
    match err.downcast_ref::<qsl_core::Error>() {
        Some(
            qsl_core::Error::SearchExhausted { .. } | qsl_core::Error::NonFiniteObjective { .. },
        ) => EXIT_NO_CONVERGENCE,
        _ => EXIT_USAGE,
    }
}

/// SHA-256 of the experiment's canonical JSON.
pub fn config_digest(spec: &ExperimentSpec) -> String {
    let canonical = serde_json::to_string(spec).expect("spec serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

pub fn provenance(spec: &ExperimentSpec) -> String {
    format!(
        "seed={} config_sha256={} version={}",
        spec.optimizer.seed,
        config_digest(spec),
        env!("CARGO_PKG_VERSION")
    )
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn write_table(spec: &ExperimentSpec, table: &Table, default: Format) -> Result<()> {
    let text = match spec.output.format.unwrap_or(default) {
        Format::Csv => table.to_csv(&provenance(spec)),
        Format::Json => {
            let doc = serde_json::json!({
                "seed": spec.optimizer.seed,
                "config_sha256": config_digest(spec),
                "version": env!("CARGO_PKG_VERSION"),
                "rows": table.to_json(),
            });
            serde_json::to_string_pretty(&doc)? + "\n"
        }
    };
    emit(&text, spec.output.path.as_deref())
}

pub fn write_json<T: Serialize>(spec: &ExperimentSpec, value: &T) -> Result<()> {
    emit(
        &(serde_json::to_string_pretty(value)? + "\n"),
        spec.output.path.as_deref(),
    )
}
