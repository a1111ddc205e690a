//! Run manifests: flat `key=value` files written next to every output.
//!
//! Keys are ASCII `[A-Za-z0-9_.-]+`. Values are escaped so that a value
//! never spans lines (`\\` and `\n`). Lines starting with `#` and blank
//! lines are ignored.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Ordered key/value record of a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunManifest {
    entries: Vec<(String, String)>,
}

fn valid_key(key: &str) -> bool {
    !key.is_empty()
        && key
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'.' || b == b'-')
}

fn escape(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for c in value.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(value: &str, line: usize) -> Result<String> {
    let mut out = String::with_capacity(value.len());
    let mut chars = value.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            other => {
                return Err(Error::Schema(format!(
                    "manifest line {line}: bad escape `\\{}`",
                    other.map(String::from).unwrap_or_default()
                )))
            }
        }
    }
    Ok(out)
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        let mut m = Self::default();
        m.set("command", command);
        m.set("tool_version", TOOL_VERSION);
        m
    }

    /// Inserts or replaces `key`. Panics on a malformed key, which is a
    /// programming error.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        assert!(valid_key(key), "invalid manifest key `{key}`");
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Schema(format!("manifest has no `{key}` entry")))
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn command(&self) -> Option<&str> {
        self.get("command")
    }

    /// Stores a list as `key.count` plus `key.0`, `key.1`, ...
    pub fn set_list(&mut self, key: &str, values: &[String]) {
        self.set(&format!("{key}.count"), values.len());
        for (i, v) in values.iter().enumerate() {
            self.set(&format!("{key}.{i}"), v);
        }
    }

    pub fn get_list(&self, key: &str) -> Result<Vec<String>> {
        let count: usize = self
            .require(&format!("{key}.count"))?
            .parse()
            .map_err(|_| Error::Schema(format!("manifest `{key}.count` is not a count")))?;
        (0..count)
            .map(|i| self.require(&format!("{key}.{i}")).map(str::to_string))
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k}={}", escape(v));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim_end_matches('\r');
            if trimmed.trim().is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| {
                Error::Schema(format!("manifest line {line}: expected key=value"))
            })?;
            let key = key.trim();
            if !valid_key(key) {
                return Err(Error::Schema(format!("manifest line {line}: invalid key `{key}`")));
            }
            if m.get(key).is_some() {
                return Err(Error::Schema(format!("manifest line {line}: duplicate key `{key}`")));
            }
            m.entries.push((key.to_string(), unescape(value, line)?));
        }
        Ok(m)
    }

    pub fn write_next_to(&self, output: &Path) -> Result<PathBuf> {
        let path = manifest_path(output);
        std::fs::write(&path, self.to_text())?;
        Ok(path)
    }
}

/// `<output>.manifest`
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn fingerprint(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}
