use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

/// Provenance block embedded in every report. Wall-clock time is left out so
/// that re-runs are byte-identical; a fixed build time can be supplied
/// through `SOURCE_DATE_EPOCH`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    /// SHA-256 of the canonical JSON form of the effective configuration.
    pub config_hash: String,
    pub seed: u64,
    pub source_date_epoch: Option<u64>,
    /// Output files, relative to the output directory.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new<C: Serialize>(command: &'static str, config: &C, seed: u64, outputs: &[&str]) -> CliResult<Self> {
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            tool: "pfa-lab",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_hash: config_hash(config)?,
            seed,
            source_date_epoch: std::env::var("SOURCE_DATE_EPOCH")
                .ok()
                .and_then(|s| s.trim().parse().ok()),
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
        })
    }
}

/// Sorted-key compact JSON; the same configuration always hashes the same
/// regardless of field order in the source file.
pub fn canonical_json<C: Serialize>(config: &C) -> CliResult<String> {
    // serde_json's default map is ordered by key
    let value = serde_json::to_value(config)
        .map_err(|e| CliError::Input(format!("cannot canonicalize configuration: {e}")))?;
    Ok(value.to_string())
}

pub fn config_hash<C: Serialize>(config: &C) -> CliResult<String> {
    Ok(hex::encode(Sha256::digest(canonical_json(config)?.as_bytes())))
}
