//! Canonical JSON, content digests and run manifests.

use std::fmt::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::params::SpecConfig;

/// Sorted keys, no whitespace, floats with 17 significant digits.
pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&v, &mut out);
    Ok(out)
}

fn write_value(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                let f = n.as_f64().expect("f64");
                let _ = write!(out, "{f:.16e}");
            } else {
                let _ = write!(out, "{n}");
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_value(&map[k], out);
            }
            out.push('}');
        }
    }
}

pub fn sha256(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn digest_hex(bytes: &[u8]) -> String {
    hex(&sha256(bytes))
}

/// Hash of the canonical form of a configuration.
pub fn config_hash(config: &SpecConfig) -> [u8; 32] {
    let text = canonical_json(config).expect("config serializes");
    sha256(text.as_bytes())
}

/// Writes the canonical form plus a newline; returns the file digest.
pub fn write_report<T: Serialize + ?Sized>(report: &T, path: &Path) -> Result<String> {
    let mut text = canonical_json(report)?;
    text.push('\n');
    std::fs::write(path, text.as_bytes())?;
    Ok(digest_hex(text.as_bytes()))
}

pub fn file_digest(path: &Path) -> Result<String> {
    Ok(digest_hex(&std::fs::read(path)?))
}

/// Re-reads a file and compares its digest.
pub fn verify(path: &Path, expected: &str) -> Result<bool> {
    Ok(file_digest(path)? == expected)
}

/// Seconds since the epoch; `SOURCE_DATE_EPOCH` pins it for reproducible manifests.
pub fn now_unix() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.parse().ok()) {
        return t;
    }
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: Option<SpecConfig>,
    pub seeds: Vec<u64>,
    pub version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<OutputDigest>,
}

impl RunManifest {
    pub fn start(subcommand: &str, config: Option<SpecConfig>, seeds: Vec<u64>) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            config,
            seeds,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: now_unix(),
            finished_unix: 0,
            outputs: Vec::new(),
        }
    }

    pub fn add_output(&mut self, path: &Path) -> Result<()> {
        let sha256 = file_digest(path)?;
        self.outputs.push(OutputDigest { path: path.display().to_string(), sha256 });
        Ok(())
    }

    pub fn finish(&mut self, path: &Path) -> Result<String> {
        self.finished_unix = now_unix();
        write_report(self, path)
    }
}

/// Parses a digest-bearing JSON file back into a value.
pub fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))
}
