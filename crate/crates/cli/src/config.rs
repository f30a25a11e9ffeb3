//! Flat `key = value` configuration with typed, tracked lookups.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration key `{key}`: {reason}")]
    Key { key: String, reason: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("validation failed: {0}")]
    ValidationFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Key { .. } | CliError::Config(_) => 1,
            CliError::Io { .. } => 2,
            CliError::ValidationFailed(_) => 3,
        }
    }

    pub fn key(key: &str, reason: impl Into<String>) -> Self {
        CliError::Key { key: key.to_string(), reason: reason.into() }
    }
}

impl From<spinecho_core::Error> for CliError {
    fn from(e: spinecho_core::Error) -> Self {
        match e {
            spinecho_core::Error::InvalidInput { name, reason } => CliError::key(name, reason),
            other => CliError::Config(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn normalize(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

/// Parsed configuration. Every lookup marks its key as used so that
/// [`ConfigMap::finish`] can reject unknown keys.
#[derive(Debug, Default, Clone)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

impl ConfigMap {
    /// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut map = ConfigMap::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`, got `{raw}`", lineno + 1)))?;
            let k = normalize(k);
            if k.is_empty() {
                return Err(CliError::Config(format!("line {}: empty key", lineno + 1)));
            }
            map.entries.insert(k, v.trim().to_string());
        }
        Ok(map)
    }

    /// Parses a `key=value` command-line override.
    pub fn parse_override(spec: &str) -> CliResult<(String, String)> {
        let (k, v) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{spec}` must look like key=value")))?;
        Ok((normalize(k), v.trim().to_string()))
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(normalize(key), value.into());
    }

    pub fn merge(&mut self, other: &ConfigMap) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.used.borrow_mut().insert(key.to_string());
        self.entries.get(key).map(String::as_str)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> CliResult<f64> {
        Ok(self.opt_f64(key)?.unwrap_or(default))
    }

    pub fn opt_f64(&self, key: &str) -> CliResult<Option<f64>> {
        self.raw(key)
            .map(|v| {
                let x: f64 = v.parse().map_err(|_| CliError::key(key, format!("`{v}` is not a number")))?;
                if x.is_finite() {
                    Ok(x)
                } else {
                    Err(CliError::key(key, "must be finite"))
                }
            })
            .transpose()
    }

    pub fn u64_or(&self, key: &str, default: u64) -> CliResult<u64> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| CliError::key(key, format!("`{v}` is not a nonnegative integer"))),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> CliResult<usize> {
        Ok(self.u64_or(key, default as u64)? as usize)
    }

    pub fn string_or(&self, key: &str, default: &str) -> String {
        self.raw(key).unwrap_or(default).to_string()
    }

    /// Comma-separated list of numbers.
    pub fn opt_f64_list(&self, key: &str) -> CliResult<Option<Vec<f64>>> {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(|s| {
                        let s = s.trim();
                        s.parse::<f64>().map_err(|_| CliError::key(key, format!("`{s}` is not a number")))
                    })
                    .collect::<CliResult<Vec<f64>>>()
            })
            .transpose()
    }

    /// Fails on the first key no lookup asked for.
    pub fn finish(&self) -> CliResult<()> {
        let used = self.used.borrow();
        match self.entries.keys().find(|k| !used.contains(*k)) {
            Some(k) => Err(CliError::key(k, "unknown key for this command")),
            None => Ok(()),
        }
    }
}
