//! Loading scenario, sweep and pipeline files (TOML or JSON by extension).

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    parse(&text, path)
}

pub fn parse<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let res = match ext {
        "json" => serde_json::from_str(text).map_err(|e| e.to_string()),
        "toml" | "" => toml::from_str(text).map_err(|e| e.to_string()),
        other => Err(format!("unsupported config extension .{other} (use .toml or .json)")),
    };
    res.map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Hex SHA-256 of the value's canonical JSON encoding.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config types serialize");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}
