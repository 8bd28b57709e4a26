//! `key: value` text documents used for reports and ground truth.
//!
//! Floats are written with Rust's shortest round-trip formatting, so
//! `parse(emit(doc))` reproduces every number bit for bit.

use std::fmt::Display;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvDoc {
    entries: Vec<(String, String)>,
}

impl KvDoc {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, value: impl Display) -> &mut Self {
        debug_assert!(!key.contains(':') && !key.contains('\n'));
        let value = value.to_string();
        debug_assert!(!value.contains('\n'));
        self.entries.push((key.to_string(), value));
        self
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.get(key).ok_or_else(|| Error::Parse { line: 0, message: format!("missing key `{key}`") })?;
        raw.parse().map_err(|_| Error::Parse { line: 0, message: format!("bad value for `{key}`: `{raw}`") })
    }

    pub fn emit(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(": ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    /// Parses `key: value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = Self::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once(':')
                .ok_or_else(|| Error::Parse { line: i + 1, message: format!("expected `key: value`, got `{line}`") })?;
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::Parse { line: i + 1, message: "empty key".into() });
            }
            doc.entries.push((k.to_string(), v.trim().to_string()));
        }
        Ok(doc)
    }
}
