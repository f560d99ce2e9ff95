//! Flat `key=value` run configuration.
//!
//! One pair per line, `#` starts a comment, blank lines are ignored.
//! Every key must be consumed by the subcommand that reads the file;
//! unknown keys are hard errors so typos cannot silently fall back to
//! defaults.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};

use crate::CliError;

pub struct KvConfig {
    values: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected key=value, got {raw:?}", lineno + 1))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(CliError::Config(format!("line {}: empty key", lineno + 1)));
            }
            if values.insert(key.clone(), value).is_some() {
                return Err(CliError::Config(format!("duplicate key {key:?}")));
            }
        }
        Ok(KvConfig {
            values,
            used: RefCell::new(BTreeSet::new()),
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn raw(&self, key: &str) -> Option<&str> {
        let v = self.values.get(key)?;
        self.used.borrow_mut().insert(key.to_string());
        Some(v.as_str())
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.raw(key).unwrap_or(default)
    }

    pub fn require_str(&self, key: &str) -> Result<&str, CliError> {
        self.raw(key)
            .ok_or_else(|| CliError::Config(format!("missing required key {key:?}")))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| CliError::Config(format!("key {key:?}: not a number: {v:?}"))),
        }
    }

    pub fn require_f64(&self, key: &str) -> Result<f64, CliError> {
        let v = self.require_str(key)?;
        v.parse()
            .map_err(|_| CliError::Config(format!("key {key:?}: not a number: {v:?}")))
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| CliError::Config(format!("key {key:?}: not an integer: {v:?}"))),
        }
    }

    pub fn require_u64(&self, key: &str) -> Result<u64, CliError> {
        let v = self.require_str(key)?;
        v.parse()
            .map_err(|_| CliError::Config(format!("key {key:?}: not an integer: {v:?}")))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, CliError> {
        Ok(self.u64_or(key, default as u64)? as usize)
    }

    /// Comma-separated list of numbers.
    pub fn require_f64_list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        let v = self.require_str(key)?;
        v.split(',')
            .map(|part| {
                part.trim()
                    .parse()
                    .map_err(|_| CliError::Config(format!("key {key:?}: bad list entry {part:?}")))
            })
            .collect()
    }

    /// Errors if any key was never read: it is either misspelled or does
    /// not belong to this subcommand.
    pub fn finish(self) -> Result<(), CliError> {
        let used = self.used.into_inner();
        let unknown: Vec<String> = self
            .values
            .keys()
            .filter(|k| !used.contains(*k))
            .cloned()
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(format!(
                "unknown config keys: {}",
                unknown.join(", ")
            )))
        }
    }
}
