use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use phenofront::ModelConfig64;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// JSON number rounded to 12 significant digits; non-finite values become `null`.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        Value::from(format!("{x:.11e}").parse::<f64>().expect("formatted float"))
    } else {
        Value::Null
    }
}

pub fn opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

/// CSV field with 10 significant digits, shortest round-trip form.
pub fn csv(x: f64) -> String {
    if x.is_finite() {
        let v: f64 = format!("{x:.9e}").parse().expect("formatted float");
        if v == 0.0 || (1e-4..1e15).contains(&v.abs()) {
            v.to_string()
        } else {
            format!("{v:e}")
        }
    } else {
        String::new()
    }
}

pub fn to_json(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

/// sha256 of the canonical text form, so formatting and comments do not change the hash.
pub fn config_hash(cfg: &ModelConfig64) -> String {
    hex::encode(Sha256::digest(cfg.to_text().as_bytes()))
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config_hash: String,
    pub tool_version: String,
    pub threads: usize,
    /// Excluded from determinism comparisons, like `runtime_ms`.
    pub wall_time_ms: f64,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, cfg: &ModelConfig64) -> Self {
        Self {
            command: command.to_string(),
            args: std::env::args().skip(1).collect(),
            config_hash: config_hash(cfg),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            threads: rayon::current_num_threads(),
            wall_time_ms: 0.0,
            outputs: Vec::new(),
        }
    }

    /// Writes `contents` to `path` and records it.
    pub fn write(&mut self, path: &Path, contents: &[u8]) -> io::Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, contents)?;
        self.outputs.push(path.display().to_string());
        Ok(())
    }

    pub fn finish(mut self, path: &Path, wall_ms: f64) -> io::Result<()> {
        self.wall_time_ms = (wall_ms * 1e3).round() / 1e3;
        let text = serde_json::to_string_pretty(&self).expect("serializable") + "\n";
        fs::write(path, text)
    }
}

/// `prefix` + `name`; a prefix naming a directory (existing, or ending in a separator)
/// places the file inside it.
pub fn prefixed(prefix: &Path, name: &str) -> PathBuf {
    let s = prefix.as_os_str().to_string_lossy();
    if prefix.is_dir() || s.ends_with('/') || s.ends_with(std::path::MAIN_SEPARATOR) {
        prefix.join(name)
    } else {
        PathBuf::from(format!("{s}{name}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(num(2.0).to_string(), "2.0");
        assert_eq!(num(1.0 / 3.0).to_string(), "0.333333333333");
        assert_eq!(num(f64::NAN), Value::Null);
        assert_eq!(csv(2.0), "2");
        assert_eq!(csv(std::f64::consts::PI), "3.141592654");
        assert_eq!(csv(-1.5e-20), "-1.5e-20");
    }

    #[test]
    fn prefix_paths() {
        assert_eq!(prefixed(Path::new("runs/c5_"), "front.csv"), PathBuf::from("runs/c5_front.csv"));
        assert_eq!(prefixed(Path::new("runs/"), "front.csv"), PathBuf::from("runs/front.csv"));
    }
}
