//! Run manifests: flat `key = value` text written next to every output.
//!
//! The `arg.N` entries hold the fully resolved command line, defaults
//! included, so `fms replay` can rerun the command exactly.

use std::fmt::Write as _;
use std::path::Path;

use chrono::{SecondsFormat, Utc};

use crate::error::{CliError, CliResult};

pub const FILE_NAME: &str = "manifest.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    entries: Vec<(String, String)>,
}

pub fn timestamp() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn new(command: &str, argv: &[String]) -> Self {
        let mut m = RunManifest {
            entries: Vec::new(),
        };
        m.set("command", command);
        m.set("version", fms::VERSION);
        m.set("started", timestamp());
        for (i, a) in argv.iter().enumerate() {
            m.set(format!("arg.{i}"), a);
        }
        m
    }

    /// Appends an entry; a later entry with the same key wins on lookup.
    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// The recorded command line, without the program name.
    pub fn argv(&self) -> Vec<String> {
        (0..)
            .map_while(|i| self.get(&format!("arg.{i}")).map(str::to_string))
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# fms run manifest\n");
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once(" =")
                .ok_or_else(|| format!("line {}: expected 'key = value'", n + 1))?;
            let v = v.strip_prefix(' ').unwrap_or(v);
            entries.push((k.trim().to_string(), v.to_string()));
        }
        Ok(RunManifest { entries })
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::input(path, e.to_string()))?;
        RunManifest::parse(&text).map_err(|e| CliError::input(path, e))
    }
}
