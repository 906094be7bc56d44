//! Collects the files of one run and writes them with a manifest.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use spreadlab_core::export::write_text;

use crate::config::{Format, RunConfig};
use crate::error::CliResult;

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct FileEntry {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    scenario: &'a str,
    config_hash: String,
    config: &'a RunConfig,
    files: Vec<FileEntry>,
}

/// Buffers named outputs; nothing touches the disk until [`Emitter::finish`].
pub struct Emitter {
    dir: PathBuf,
    formats: Vec<Format>,
    files: Vec<(String, String)>,
}

impl Emitter {
    pub fn new(root: &Path, cfg: &RunConfig) -> Self {
        Emitter { dir: root.join(&cfg.scenario.name), formats: cfg.output.formats.clone(), files: Vec::new() }
    }

    fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    pub fn csv(&mut self, name: &str, text: String) {
        if self.wants(Format::Csv) {
            self.files.push((format!("{name}.csv"), text));
        }
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        if self.wants(Format::Json) {
            let mut text = serde_json::to_string_pretty(value)?;
            text.push('\n');
            self.files.push((format!("{name}.json"), text));
        }
        Ok(())
    }

    pub fn svg(&mut self, name: &str, text: String) {
        if self.wants(Format::Svg) {
            self.files.push((format!("{name}.svg"), text));
        }
    }

    /// Writes every file plus `manifest.json`; returns the output directory.
    pub fn finish(self, command: &str, cfg: &RunConfig) -> CliResult<PathBuf> {
        let mut entries = Vec::with_capacity(self.files.len());
        for (name, text) in &self.files {
            write_text(&self.dir.join(name), text)?;
            entries.push(FileEntry { path: name.clone(), sha256: sha256_hex(text.as_bytes()) });
        }
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            scenario: &cfg.scenario.name,
            config_hash: config_hash(cfg)?,
            config: cfg,
            files: entries,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        write_text(&self.dir.join("manifest.json"), &text)?;
        Ok(self.dir)
    }
}

/// SHA-256 of the compact JSON form of the resolved config.
pub fn config_hash(cfg: &RunConfig) -> CliResult<String> {
    Ok(sha256_hex(serde_json::to_string(cfg)?.as_bytes()))
}
