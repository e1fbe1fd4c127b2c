use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const MANIFEST_SCHEMA: &str = "stochnewton.manifest/v1";
pub const ERROR_SCHEMA: &str = "stochnewton.error/v1";

pub fn schema_id(command: &str) -> String {
    format!("stochnewton.{command}/v1")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A result document: the versioned schema id and the command's payload.
pub fn result_document(command: &str, result: &Value) -> Value {
    json!({ "schema": schema_id(command), "result": result })
}

pub fn pretty(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON value serializes");
    s.push('\n');
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputRecord {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub sha256: String,
}

impl OutputRecord {
    pub fn bytes(name: &str, path: Option<&Path>, bytes: &[u8]) -> Self {
        Self { name: name.to_string(), path: path.map(Path::to_path_buf), sha256: sha256_hex(bytes) }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub schema: &'static str,
    pub command: String,
    /// Subcommand arguments as parsed.
    pub args: Value,
    /// Effective settings, accepted back by `--config`.
    pub config: Value,
    pub seed: u64,
    pub version: &'static str,
    pub wall_time_s: f64,
    pub outputs: Vec<OutputRecord>,
}
