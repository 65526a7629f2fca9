//! CSV writers and the run manifest.

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

/// Fixed-width scientific notation so reruns produce identical bytes.
pub fn num(x: f64) -> String {
    format!("{x:.12e}")
}

pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self { text: header.join(",") + "\n" }
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, cells: I) {
        let cells: Vec<String> = cells.into_iter().collect();
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub input_file: String,
    pub input_sha256: String,
    pub config: serde_json::Value,
    pub tool_version: String,
    pub outputs: Vec<String>,
}

/// Collects files under an output directory and records them in
/// `manifest.json`.
pub struct OutputDir {
    dir: Option<PathBuf>,
    written: Vec<String>,
}

impl OutputDir {
    pub fn new(dir: Option<PathBuf>) -> Result<Self> {
        if let Some(d) = &dir {
            fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
        }
        Ok(Self { dir, written: Vec::new() })
    }

    pub fn write(&mut self, name: &str, csv: &Csv) -> Result<()> {
        if let Some(d) = &self.dir {
            let path = d.join(name);
            fs::write(&path, csv.as_str()).with_context(|| format!("writing {}", path.display()))?;
            self.written.push(name.to_string());
        }
        Ok(())
    }

    pub fn finish(self, command: &str, input: &Path, input_bytes: &[u8], config: serde_json::Value) -> Result<()> {
        let Some(d) = self.dir else { return Ok(()) };
        let manifest = RunManifest {
            command: command.to_string(),
            input_file: input.display().to_string(),
            input_sha256: sha256_hex(input_bytes),
            config,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: self.written,
        };
        let path = d.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}
