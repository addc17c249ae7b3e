// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config: serde_json::Value,
    /// Path → SHA-256 of every input read.
    pub inputs: BTreeMap<String, String>,
    /// Path relative to the output directory → SHA-256.
    pub outputs: BTreeMap<String, String>,
    pub counts: BTreeMap<String, u64>,
    pub wall_clock_seconds: f64,
}

/// Collects what a run read and wrote, then writes `manifest.json` last.
pub struct RunRecorder {
    out: PathBuf,
    started: Instant,
    manifest: RunManifest,
}

impl RunRecorder {
    pub fn new<C: Serialize>(command: &str, config: &C, out: &Path) -> Self {
        Self {
            out: out.to_path_buf(),
            started: Instant::now(),
            manifest: RunManifest {
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                command: command.to_string(),
                config: serde_json::to_value(config).expect("config serializes"),
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
                counts: BTreeMap::new(),
                wall_clock_seconds: 0.0,
            },
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let hash = io::sha256_file(path)?;
        self.manifest.inputs.insert(path.display().to_string(), hash);
        Ok(())
    }

    pub fn count(&mut self, key: &str, n: u64) {
        *self.manifest.counts.entry(key.to_string()).or_default() += n;
    }

    /// Writes `bytes` to `relative` under the output directory.
    pub fn write(&mut self, relative: &str, bytes: &[u8]) -> Result<()> {
        io::write_atomic(&self.out.join(relative), bytes)?;
        self.manifest.outputs.insert(relative.to_string(), io::sha256_hex(bytes));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, relative: &str, value: &T) -> Result<()> {
        self.write(relative, &io::to_json_pretty(value))
    }

    pub fn finish(mut self) -> Result<RunManifest> {
        self.manifest.wall_clock_seconds = self.started.elapsed().as_secs_f64();
        io::write_json(&self.out.join("manifest.json"), &self.manifest)?;
        Ok(self.manifest)
    }
}
